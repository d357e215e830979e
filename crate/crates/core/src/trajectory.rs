//! Observed paths: progress distance, fixed-epoch resampling, headings and
//! progress-gated prefixes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Segments shorter than this count as stationary when computing headings.
pub const STATIONARY_EPS_M: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("trajectory needs at least 2 samples, got {0}")]
    TooShort(usize),
    #[error("sample {index}: time {t} does not increase past the previous sample")]
    NonIncreasingTime { index: usize, t: f64 },
    #[error("sample {index}: non-finite value")]
    NonFinite { index: usize },
    #[error("expected {expected} epochs, got {found}")]
    EpochCount { expected: usize, found: usize },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed trajectory csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

impl Sample {
    pub const fn new(t: f64, x: f64, y: f64) -> Self {
        Sample { t, x, y }
    }

    pub fn distance_to(&self, other: &Sample) -> f64 {
        (other.x - self.x).hypot(other.y - self.y)
    }

    fn lerp(&self, other: &Sample, frac: f64) -> Sample {
        Sample {
            t: self.t + (other.t - self.t) * frac,
            x: self.x + (other.x - self.x) * frac,
            y: self.y + (other.y - self.y) * frac,
        }
    }
}

/// Timestamped 2D path in world meters. At least two samples, strictly
/// increasing time.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    samples: Vec<Sample>,
}

impl Trajectory {
    pub fn new(samples: Vec<Sample>) -> Result<Self, TrajectoryError> {
        if samples.len() < 2 {
            return Err(TrajectoryError::TooShort(samples.len()));
        }
        for (index, s) in samples.iter().enumerate() {
            if !(s.t.is_finite() && s.x.is_finite() && s.y.is_finite()) {
                return Err(TrajectoryError::NonFinite { index });
            }
            if index > 0 && s.t <= samples[index - 1].t {
                return Err(TrajectoryError::NonIncreasingTime { index, t: s.t });
            }
        }
        Ok(Trajectory { samples })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first(&self) -> Sample {
        self.samples[0]
    }

    pub fn last(&self) -> Sample {
        self.samples[self.samples.len() - 1]
    }

    pub fn duration(&self) -> f64 {
        self.last().t - self.first().t
    }

    /// Cumulative Euclidean path length.
    pub fn progress_distance(&self) -> f64 {
        self.samples.windows(2).map(|w| w[0].distance_to(&w[1])).sum()
    }

    /// `n` samples uniformly spaced in time over the observed window, with
    /// linearly interpolated positions. Endpoints are preserved exactly.
    pub fn resample_to_epochs(&self, n: usize) -> Trajectory {
        assert!(n >= 2, "resampling needs at least two epochs");
        let (t0, t1) = (self.first().t, self.last().t);
        let mut out = Vec::with_capacity(n);
        let mut seg = 0;
        for i in 0..n {
            if i == 0 {
                out.push(self.first());
                continue;
            }
            if i == n - 1 {
                out.push(self.last());
                continue;
            }
            let t = t0 + (t1 - t0) * i as f64 / (n - 1) as f64;
            while seg + 2 < self.samples.len() && self.samples[seg + 1].t <= t {
                seg += 1;
            }
            let (a, b) = (&self.samples[seg], &self.samples[seg + 1]);
            let s = if t == a.t {
                *a
            } else if t == b.t {
                *b
            } else {
                let mut s = a.lerp(b, (t - a.t) / (b.t - a.t));
                s.t = t;
                s
            };
            out.push(s);
        }
        // Uniform spacing keeps times strictly increasing for t1 > t0.
        Trajectory { samples: out }
    }

    /// Per-sample heading in radians (`atan2(dy, dx)`) of the segment to the
    /// next sample. Stationary segments and the final sample copy the previous
    /// heading; heading is 0 until the first motion.
    pub fn headings(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.samples.len());
        let mut prev = 0.0;
        for w in self.samples.windows(2) {
            let (dx, dy) = (w[1].x - w[0].x, w[1].y - w[0].y);
            if dx.hypot(dy) >= STATIONARY_EPS_M {
                prev = dy.atan2(dx);
            }
            out.push(prev);
        }
        out.push(prev);
        out
    }

    /// Shortest prefix with progress `d`, ending on an interpolated sample so
    /// the prefix progress equals `d`. Returns the whole trajectory and
    /// `saturated = true` when the total progress is below `d`.
    pub fn truncate_at_progress(&self, d: f64) -> (Trajectory, bool) {
        let d = d.max(0.0);
        let s = &self.samples;
        if d == 0.0 {
            let start = Sample::new(s[1].t, s[0].x, s[0].y);
            return (Trajectory { samples: vec![s[0], start] }, false);
        }
        let mut cum = 0.0;
        for i in 0..s.len() - 1 {
            let seg = s[i].distance_to(&s[i + 1]);
            if seg > 0.0 && cum + seg >= d {
                let frac = (d - cum) / seg;
                let mut prefix = s[..=i].to_vec();
                if frac >= 1.0 {
                    prefix.push(s[i + 1]);
                } else {
                    prefix.push(s[i].lerp(&s[i + 1], frac));
                }
                return (Trajectory { samples: prefix }, false);
            }
            cum += seg;
        }
        (self.clone(), true)
    }

    pub fn load_csv(path: &Path) -> Result<Trajectory, TrajectoryError> {
        let text = fs::read_to_string(path).map_err(|source| TrajectoryError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_csv_str(&text)
    }

    /// Parses `t,x,y` CSV (LF or CRLF line endings).
    pub fn from_csv_str(text: &str) -> Result<Trajectory, TrajectoryError> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let samples = reader
            .deserialize::<Sample>()
            .collect::<Result<Vec<_>, _>>()?;
        Trajectory::new(samples)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("t,x,y\n");
        for s in &self.samples {
            out.push_str(&format!("{},{},{}\n", s.t, s.x, s.y));
        }
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), TrajectoryError> {
        fs::write(path, self.to_csv_string()).map_err(|source| TrajectoryError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}
