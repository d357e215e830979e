//! Procedural floor plans: rectangular rooms split off a square house, one
//! door per split wall, objects as floor footprints against walls.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::DatasetError;
use crate::scene::{GridGeometry, ObjectRegion, Pixel, Scene, SceneMap};

pub const OUTER_WALL_PX: usize = 2;
pub const WALL_PX: usize = 3;
pub const DOOR_PX: usize = 24;
pub const MIN_ROOM_PX: usize = 48;
const OBJECT_MARGIN_PX: usize = 3;
const DOOR_CLEARANCE_PX: usize = 6;
const PLACEMENT_ATTEMPTS: usize = 400;

/// Household objects the generator draws from, with a display color each.
pub const OBJECT_VOCABULARY: [(&str, [u8; 3]); 24] = [
    ("armchair", [141, 110, 99]),
    ("bathtub", [77, 208, 225]),
    ("bed", [149, 117, 205]),
    ("bookshelf", [161, 136, 127]),
    ("cabinet", [188, 170, 164]),
    ("coffee maker", [121, 85, 72]),
    ("desk", [255, 183, 77]),
    ("dining table", [255, 213, 79]),
    ("dishwasher", [144, 164, 174]),
    ("fridge", [129, 212, 250]),
    ("lamp", [255, 241, 118]),
    ("microwave", [176, 190, 197]),
    ("mirror", [224, 247, 250]),
    ("piano", [66, 66, 66]),
    ("plant", [129, 199, 132]),
    ("printer", [158, 158, 158]),
    ("shoe rack", [215, 204, 200]),
    ("sink", [0, 188, 212]),
    ("sofa", [240, 98, 146]),
    ("stove", [239, 83, 80]),
    ("toilet", [236, 239, 241]),
    ("tv", [92, 107, 192]),
    ("wardrobe", [186, 104, 200]),
    ("washing machine", [100, 181, 246]),
];

pub fn vocabulary_color(label: &str) -> [u8; 3] {
    OBJECT_VOCABULARY
        .iter()
        .find(|(l, _)| *l == label)
        .map(|(_, c)| *c)
        .unwrap_or([128, 128, 128])
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoomSpec {
    pub rooms: usize,
    pub objects: usize,
    /// Labels that must appear.
    pub required: Vec<String>,
    /// Labels that must not appear.
    pub excluded: Vec<String>,
}

impl RoomSpec {
    pub fn new(rooms: usize, objects: usize) -> Self {
        RoomSpec {
            rooms,
            objects,
            required: Vec::new(),
            excluded: Vec::new(),
        }
    }
}

/// Half-open pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Rect {
    r0: usize,
    c0: usize,
    r1: usize,
    c1: usize,
}

impl Rect {
    fn height(&self) -> usize {
        self.r1 - self.r0
    }

    fn width(&self) -> usize {
        self.c1 - self.c0
    }

    fn grown(&self, m: usize) -> Rect {
        Rect {
            r0: self.r0.saturating_sub(m),
            c0: self.c0.saturating_sub(m),
            r1: self.r1 + m,
            c1: self.c1 + m,
        }
    }

    fn intersects(&self, o: &Rect) -> bool {
        self.r0 < o.r1 && o.r0 < self.r1 && self.c0 < o.c1 && o.c0 < self.c1
    }

    fn pixels(&self) -> impl Iterator<Item = Pixel> + '_ {
        (self.r0..self.r1).flat_map(move |r| (self.c0..self.c1).map(move |c| Pixel::new(r, c)))
    }
}

fn split_rooms(rng: &mut ChaCha8Rng, side: usize, count: usize) -> Result<(Vec<Rect>, Vec<Rect>), DatasetError> {
    let inner = side - OUTER_WALL_PX;
    let mut rooms = vec![Rect {
        r0: OUTER_WALL_PX,
        c0: OUTER_WALL_PX,
        r1: inner,
        c1: inner,
    }];
    let mut doors = Vec::new();
    let min_span = 2 * MIN_ROOM_PX + WALL_PX;
    while rooms.len() < count {
        let pick = rooms
            .iter()
            .enumerate()
            .filter(|(_, r)| r.height().max(r.width()) >= min_span)
            .max_by_key(|(i, r)| (r.height() * r.width(), usize::MAX - i))
            .map(|(i, _)| i)
            .ok_or_else(|| DatasetError::Infeasible(format!("cannot fit {count} rooms of at least {MIN_ROOM_PX} px")))?;
        let room = rooms.remove(pick);
        let split_rows = room.height() > room.width() || (room.height() == room.width() && rng.gen_bool(0.5));
        let (lo, hi) = if split_rows { (room.r0, room.r1) } else { (room.c0, room.c1) };
        let at = rng.gen_range(lo + MIN_ROOM_PX..=hi - MIN_ROOM_PX - WALL_PX);
        let (other_lo, other_hi) = if split_rows { (room.c0, room.c1) } else { (room.r0, room.r1) };
        let door_at = rng.gen_range(other_lo + 4..=other_hi - 4 - DOOR_PX);
        let (a, b, door) = if split_rows {
            (
                Rect { r1: at, ..room },
                Rect { r0: at + WALL_PX, ..room },
                Rect {
                    r0: at,
                    r1: at + WALL_PX,
                    c0: door_at,
                    c1: door_at + DOOR_PX,
                },
            )
        } else {
            (
                Rect { c1: at, ..room },
                Rect { c0: at + WALL_PX, ..room },
                Rect {
                    r0: door_at,
                    r1: door_at + DOOR_PX,
                    c0: at,
                    c1: at + WALL_PX,
                },
            )
        };
        rooms.push(a);
        rooms.push(b);
        doors.push(door);
    }
    Ok((rooms, doors))
}

/// Rectangle of `along` x `depth` pixels against `side` (0 top, 1 bottom,
/// 2 left, 3 right) of `room`, `offset` pixels from the wall start.
fn against_wall(room: &Rect, side: u8, along: usize, depth: usize, offset: usize) -> Rect {
    match side {
        0 => Rect {
            r0: room.r0,
            r1: room.r0 + depth,
            c0: room.c0 + offset,
            c1: room.c0 + offset + along,
        },
        1 => Rect {
            r0: room.r1 - depth,
            r1: room.r1,
            c0: room.c0 + offset,
            c1: room.c0 + offset + along,
        },
        2 => Rect {
            r0: room.r0 + offset,
            r1: room.r0 + offset + along,
            c0: room.c0,
            c1: room.c0 + depth,
        },
        _ => Rect {
            r0: room.r0 + offset,
            r1: room.r0 + offset + along,
            c0: room.c1 - depth,
            c1: room.c1,
        },
    }
}

fn object_labels(rng: &mut ChaCha8Rng, spec: &RoomSpec) -> Result<Vec<String>, DatasetError> {
    if spec.rooms == 0 || spec.objects == 0 {
        return Err(DatasetError::Infeasible("rooms and objects must both be at least 1".into()));
    }
    if spec.required.len() > spec.objects {
        return Err(DatasetError::Infeasible(format!(
            "{} required labels exceed {} objects",
            spec.required.len(),
            spec.objects
        )));
    }
    if let Some(l) = spec.required.iter().find(|l| spec.excluded.contains(l)) {
        return Err(DatasetError::Infeasible(format!("`{l}` is both required and excluded")));
    }
    let mut fillers: Vec<&str> = OBJECT_VOCABULARY
        .iter()
        .map(|(l, _)| *l)
        .filter(|l| !spec.required.iter().any(|r| r == l) && !spec.excluded.iter().any(|e| e == l))
        .collect();
    let needed = spec.objects - spec.required.len();
    if fillers.len() < needed {
        return Err(DatasetError::Infeasible(format!(
            "only {} distinct filler labels for {needed} objects",
            fillers.len()
        )));
    }
    fillers.shuffle(rng);
    let mut labels = spec.required.clone();
    labels.extend(fillers[..needed].iter().map(|s| s.to_string()));
    Ok(labels)
}

/// Deterministic per `(seed, spec)`. Walkable space is always connected.
pub fn gen_scene(seed: u64, spec: &RoomSpec) -> Result<Scene, DatasetError> {
    let geom = GridGeometry::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = object_labels(&mut rng, spec)?;
    let (rooms, doors) = split_rooms(&mut rng, geom.width_px, spec.rooms)?;

    let mut cells = vec![0u8; geom.cell_count()];
    for r in rooms.iter().chain(&doors) {
        for p in r.pixels() {
            cells[geom.index(p)] = 1;
        }
    }
    let map = SceneMap::new(geom, cells)?;

    let mut placed: Vec<Rect> = Vec::new();
    let mut objects = Vec::with_capacity(labels.len());
    for label in &labels {
        let rect = (0..PLACEMENT_ATTEMPTS)
            .map(|_| {
                let room = rooms[rng.gen_range(0..rooms.len())];
                let side: u8 = rng.gen_range(0..4);
                let along = rng.gen_range(10..=22);
                let depth = rng.gen_range(6..=10);
                let span = if side < 2 { room.width() } else { room.height() };
                let offset = rng.gen_range(0..=span - along);
                against_wall(&room, side, along, depth, offset)
            })
            .find(|cand| {
                !placed.iter().any(|p| p.grown(OBJECT_MARGIN_PX).intersects(cand))
                    && !doors.iter().any(|d| d.grown(DOOR_CLEARANCE_PX).intersects(cand))
            })
            .ok_or_else(|| DatasetError::Infeasible(format!("no free wall space left for `{label}`")))?;
        placed.push(rect);
        objects.push(ObjectRegion::new(label.clone(), rect.pixels().collect(), vocabulary_color(label)));
    }
    objects.sort_by(|a, b| a.label.cmp(&b.label));
    Ok(Scene::new(format!("synthetic_{seed}"), map, objects)?)
}
