//! 8-connected geodesic distances over walkable cells.
//!
//! Path lengths are tracked exactly as `axial + diagonal * sqrt(2)` step counts,
//! so equal-length paths compare equal regardless of the order they were
//! discovered in. Conversion to meters happens once, at the end.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::scene::{GridGeometry, Pixel, SceneMap};

/// Path length in grid steps: `axial + diagonal * sqrt(2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Octile {
    pub axial: u32,
    pub diagonal: u32,
}

impl Octile {
    pub const ZERO: Octile = Octile { axial: 0, diagonal: 0 };

    pub fn new(axial: u32, diagonal: u32) -> Self {
        Octile { axial, diagonal }
    }

    pub fn steps(self) -> f64 {
        self.axial as f64 + self.diagonal as f64 * std::f64::consts::SQRT_2
    }

    pub fn meters(self, pitch: f64) -> f64 {
        self.steps() * pitch
    }

}

impl std::ops::Add for Octile {
    type Output = Octile;

    fn add(self, other: Octile) -> Octile {
        Octile::new(self.axial + other.axial, self.diagonal + other.diagonal)
    }
}

impl Ord for Octile {
    fn cmp(&self, other: &Self) -> Ordering {
        // sign of (a1 - a2) - (b2 - b1) * sqrt(2), decided in integers
        let x = self.axial as i64 - other.axial as i64;
        let y = other.diagonal as i64 - self.diagonal as i64;
        match (x.cmp(&0), y.cmp(&0)) {
            (Ordering::Equal, Ordering::Equal) => Ordering::Equal,
            (Ordering::Greater | Ordering::Equal, Ordering::Less | Ordering::Equal) => Ordering::Greater,
            (Ordering::Less | Ordering::Equal, Ordering::Greater | Ordering::Equal) => Ordering::Less,
            (Ordering::Greater, Ordering::Greater) => (x * x).cmp(&(2 * y * y)),
            (Ordering::Less, Ordering::Less) => (2 * y * y).cmp(&(x * x)),
        }
    }
}

impl PartialOrd for Octile {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

const AXIAL: Octile = Octile { axial: 1, diagonal: 0 };
const DIAGONAL: Octile = Octile { axial: 0, diagonal: 1 };

/// Walkable 8-neighbours of `p` with the step cost to reach them.
pub fn neighbors(map: &SceneMap, p: Pixel) -> impl Iterator<Item = (Pixel, Octile)> + '_ {
    const OFFSETS: [(i64, i64); 8] = [
        (-1, -1),
        (-1, 0),
        (-1, 1),
        (0, -1),
        (0, 1),
        (1, -1),
        (1, 0),
        (1, 1),
    ];
    let g = *map.geometry();
    OFFSETS.iter().filter_map(move |&(dr, dc)| {
        let r = p.row as i64 + dr;
        let c = p.col as i64 + dc;
        if r < 0 || c < 0 || r >= g.height_px as i64 || c >= g.width_px as i64 {
            return None;
        }
        let q = Pixel::new(r as usize, c as usize);
        if !map.is_walkable(q) {
            return None;
        }
        Some((q, if dr != 0 && dc != 0 { DIAGONAL } else { AXIAL }))
    })
}

/// Single-source geodesic distances.
#[derive(Debug, Clone)]
pub struct DistanceField {
    geometry: GridGeometry,
    steps: Vec<Option<Octile>>,
    parent: Vec<usize>,
    source: Pixel,
}

impl DistanceField {
    pub fn source(&self) -> Pixel {
        self.source
    }

    pub fn steps(&self, p: Pixel) -> Option<Octile> {
        self.steps[self.geometry.index(p)]
    }

    pub fn meters(&self, p: Pixel) -> Option<f64> {
        self.steps(p).map(|s| s.meters(self.geometry.pitch()))
    }

    pub fn reachable_count(&self) -> usize {
        self.steps.iter().filter(|s| s.is_some()).count()
    }

    /// Cell path from the source to `target`, both inclusive.
    pub fn path_to(&self, target: Pixel) -> Option<Vec<Pixel>> {
        self.steps(target)?;
        let src = self.geometry.index(self.source);
        let mut at = self.geometry.index(target);
        let mut path = vec![target];
        while at != src {
            at = self.parent[at];
            path.push(self.geometry.pixel(at));
        }
        path.reverse();
        Some(path)
    }
}

/// Dijkstra from `source`. A non-walkable source reaches nothing.
pub fn distance_field(map: &SceneMap, source: Pixel) -> DistanceField {
    distance_field_until(map, source, None)
}

/// Exact octile distance between two cells on an open grid: a lower bound
/// on any walkable path, and consistent, so A* keeps exact distances.
fn octile_lower_bound(a: Pixel, b: Pixel) -> Octile {
    let dr = a.row.abs_diff(b.row) as u32;
    let dc = a.col.abs_diff(b.col) as u32;
    Octile::new(dr.max(dc) - dr.min(dc), dr.min(dc))
}

/// Dijkstra from `source`, or A* towards `stop_at` when given. Only the
/// target's entry is final in the A* case.
fn distance_field_until(map: &SceneMap, source: Pixel, stop_at: Option<Pixel>) -> DistanceField {
    let geometry = *map.geometry();
    let n = geometry.cell_count();
    let mut steps: Vec<Option<Octile>> = vec![None; n];
    let mut parent = vec![usize::MAX; n];
    let mut done = vec![false; n];
    let field = |steps, parent| DistanceField {
        geometry,
        steps,
        parent,
        source,
    };
    if !map.is_walkable(source) {
        return field(steps, parent);
    }
    let h = |p: Pixel| stop_at.map_or(Octile::ZERO, |t| octile_lower_bound(p, t));
    let src = geometry.index(source);
    steps[src] = Some(Octile::ZERO);
    parent[src] = src;
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((h(source), src)));
    while let Some(Reverse((_, i))) = heap.pop() {
        if done[i] {
            continue;
        }
        done[i] = true;
        let p = geometry.pixel(i);
        if stop_at == Some(p) {
            break;
        }
        let d = steps[i].expect("queued cells have a distance");
        for (q, cost) in neighbors(map, p) {
            let j = geometry.index(q);
            if done[j] {
                continue;
            }
            let cand = d + cost;
            if steps[j].is_none_or(|cur| cand < cur) {
                steps[j] = Some(cand);
                parent[j] = i;
                heap.push(Reverse((cand + h(q), j)));
            }
        }
    }
    if let Some(t) = stop_at {
        let ti = geometry.index(t);
        if !done[ti] {
            steps[ti] = None;
        }
    }
    field(steps, parent)
}

/// Geodesic distance in meters, or `None` when either endpoint is an
/// obstacle or no path exists.
pub fn geodesic_distance(map: &SceneMap, a: Pixel, b: Pixel) -> Option<f64> {
    if !map.is_walkable(a) || !map.is_walkable(b) {
        return None;
    }
    distance_field_until(map, a, Some(b)).meters(b)
}

/// Shortest 8-connected cell path from `a` to `b`, endpoints included.
pub fn shortest_path(map: &SceneMap, a: Pixel, b: Pixel) -> Option<Vec<Pixel>> {
    if !map.is_walkable(a) || !map.is_walkable(b) {
        return None;
    }
    distance_field_until(map, a, Some(b)).path_to(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn octile_order_is_exact() {
        // 3 axial vs 2 diagonal: 3 > 2.828
        assert!(Octile::new(3, 0) > Octile::new(0, 2));
        // 1 + sqrt2 (2.414) vs 0 + 2 sqrt2 (2.828)
        assert!(Octile::new(1, 1) < Octile::new(0, 2));
        assert_eq!(Octile::new(2, 2).cmp(&Octile::new(2, 2)), Ordering::Equal);
        assert!(Octile::new(7, 0) < Octile::new(0, 5)); // 7 < 7.07
        assert!(Octile::new(0, 0) < Octile::new(0, 1));
    }

    #[test]
    fn identity_and_straight_line() {
        let g = GridGeometry::square(16, 10.0).unwrap();
        let map = SceneMap::open(g).unwrap();
        let a = Pixel::new(0, 0);
        assert_eq!(geodesic_distance(&map, a, a), Some(0.0));
        // five axial steps of 10/16 m
        assert_eq!(geodesic_distance(&map, a, Pixel::new(0, 5)), Some(3.125));
    }

    #[test]
    fn obstacle_endpoint_is_unreachable() {
        let g = GridGeometry::square(8, 1.0).unwrap();
        let mut cells = vec![1u8; 64];
        for r in 2..5 {
            for c in 2..5 {
                cells[g.index(Pixel::new(r, c))] = 0;
            }
        }
        let map = SceneMap::new(g, cells).unwrap();
        assert_eq!(geodesic_distance(&map, Pixel::new(0, 0), Pixel::new(3, 3)), None);
    }

    #[test]
    fn wall_blocks_and_path_detours() {
        let g = GridGeometry::square(7, 7.0).unwrap();
        let mut cells = vec![1u8; 49];
        for r in 0..6 {
            cells[g.index(Pixel::new(r, 3))] = 0;
        }
        let map = SceneMap::new(g, cells.clone()).unwrap();
        let path = shortest_path(&map, Pixel::new(0, 0), Pixel::new(0, 6)).unwrap();
        assert!(path.iter().any(|p| p.row == 6 && p.col == 3));
        assert_eq!(path.first(), Some(&Pixel::new(0, 0)));
        assert_eq!(path.last(), Some(&Pixel::new(0, 6)));

        cells[g.index(Pixel::new(6, 3))] = 0;
        let sealed = SceneMap::new(g, cells).unwrap();
        assert_eq!(geodesic_distance(&sealed, Pixel::new(0, 0), Pixel::new(0, 6)), None);
    }
}
