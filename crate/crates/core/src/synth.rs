//! Deterministic synthetic uncertainty maps and labelled benchmarks.
//!
//! Every sample draws from its own [`rng`](crate::rng) stream keyed by
//! `(population, index)`, so a population does not depend on generation
//! order or thread count.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intensity::avg;
use crate::map::{SegmentationMask, UncertaintyMap};
use crate::rng::{self, stream_id};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pattern", rename_all = "lowercase")]
pub enum Pattern {
    Constant {
        level: f64,
    },
    /// I.i.d. uniform on `[mean − amplitude, mean + amplitude]`, clipped.
    Noise {
        mean: f64,
        amplitude: f64,
    },
    /// Disk; `center` is `(row, col)` in pixel units.
    Blob {
        center: (f64, f64),
        radius: f64,
        inside: f64,
        outside: f64,
    },
    Ring {
        center: (f64, f64),
        inner_radius: f64,
        outer_radius: f64,
        value: f64,
        background: f64,
    },
    Checkerboard {
        period: usize,
        low: f64,
        high: f64,
    },
}

impl Pattern {
    pub const NAMES: [&'static str; 5] = ["constant", "noise", "blob", "ring", "checkerboard"];

    /// Archetype with default parameters scaled to an `height × width` grid.
    pub fn archetype(name: &str, height: usize, width: usize) -> Result<Self> {
        let center = (height as f64 / 2.0, width as f64 / 2.0);
        let side = height.min(width) as f64;
        Ok(match name.to_ascii_lowercase().as_str() {
            "constant" => Pattern::Constant { level: 0.3 },
            "noise" => Pattern::Noise {
                mean: 0.5,
                amplitude: 0.5,
            },
            "blob" => Pattern::Blob {
                center,
                radius: 0.18 * side,
                inside: 0.9,
                outside: 0.0,
            },
            "ring" => Pattern::Ring {
                center,
                inner_radius: 0.12 * side,
                outer_radius: 0.2 * side,
                value: 0.9,
                background: 0.0,
            },
            "checkerboard" => Pattern::Checkerboard {
                period: (height.min(width) / 8).max(1),
                low: 0.0,
                high: 0.9,
            },
            other => return Err(Error::InvalidSpec(format!("unknown pattern `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    #[serde(flatten)]
    pub pattern: Pattern,
    pub height: usize,
    pub width: usize,
    #[serde(default)]
    pub seed: u64,
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!("{name} must be finite")))
    }
}

impl SynthSpec {
    pub fn new(pattern: Pattern, height: usize, width: usize, seed: u64) -> Self {
        Self {
            pattern,
            height,
            width,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::InvalidSpec("size must be at least 1×1".into()));
        }
        match &self.pattern {
            Pattern::Constant { level } => check_finite("level", *level),
            Pattern::Noise { mean, amplitude } => {
                check_finite("mean", *mean)?;
                check_finite("amplitude", *amplitude)?;
                if *amplitude < 0.0 {
                    return Err(Error::InvalidSpec("amplitude must be >= 0".into()));
                }
                Ok(())
            }
            Pattern::Blob {
                center,
                radius,
                inside,
                outside,
            } => {
                for (n, v) in [("center", center.0), ("center", center.1), ("inside", *inside), ("outside", *outside)] {
                    check_finite(n, v)?;
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::InvalidSpec("radius must be > 0".into()));
                }
                Ok(())
            }
            Pattern::Ring {
                center,
                inner_radius,
                outer_radius,
                value,
                background,
            } => {
                for (n, v) in [("center", center.0), ("center", center.1), ("value", *value), ("background", *background)] {
                    check_finite(n, v)?;
                }
                if !(inner_radius.is_finite() && *inner_radius >= 0.0 && outer_radius > inner_radius) {
                    return Err(Error::InvalidSpec("need 0 <= inner_radius < outer_radius".into()));
                }
                Ok(())
            }
            Pattern::Checkerboard { period, low, high } => {
                check_finite("low", *low)?;
                check_finite("high", *high)?;
                if *period == 0 {
                    return Err(Error::InvalidSpec("period must be >= 1".into()));
                }
                Ok(())
            }
        }
    }
}

/// Renders `spec`; values are clipped to `[0, 1]`.
pub fn generate(spec: &SynthSpec) -> Result<UncertaintyMap> {
    spec.validate()?;
    let (h, w) = (spec.height, spec.width);
    let dist = |r: usize, c: usize, center: (f64, f64)| {
        let dr = r as f64 - center.0;
        let dc = c as f64 - center.1;
        (dr * dr + dc * dc).sqrt()
    };
    let values: Vec<f64> = match &spec.pattern {
        Pattern::Constant { level } => vec![*level; h * w],
        Pattern::Noise { mean, amplitude } => {
            let mut rng = rng::stream(spec.seed, 0);
            (0..h * w)
                .map(|_| mean + amplitude * (2.0 * rng.gen::<f64>() - 1.0))
                .collect()
        }
        Pattern::Blob {
            center,
            radius,
            inside,
            outside,
        } => (0..h * w)
            .map(|i| if dist(i / w, i % w, *center) <= *radius { *inside } else { *outside })
            .collect(),
        Pattern::Ring {
            center,
            inner_radius,
            outer_radius,
            value,
            background,
        } => (0..h * w)
            .map(|i| {
                let d = dist(i / w, i % w, *center);
                if d >= *inner_radius && d <= *outer_radius {
                    *value
                } else {
                    *background
                }
            })
            .collect(),
        Pattern::Checkerboard { period, low, high } => (0..h * w)
            .map(|i| if ((i / w) / period + (i % w) / period) % 2 == 0 { *low } else { *high })
            .collect(),
    };
    Ok(UncertaintyMap::from_clipped(h, w, values))
}

/// Synthetic risk: `clip(beta · intensity + U(−noise, noise), 0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskModel {
    pub beta: f64,
    pub noise: f64,
}

impl Default for RiskModel {
    fn default() -> Self {
        Self { beta: 0.8, noise: 0.05 }
    }
}

impl RiskModel {
    fn draw(&self, intensity: f64, rng: &mut rng::Rng) -> f64 {
        let jitter = if self.noise > 0.0 {
            rng.gen_range(-self.noise..=self.noise)
        } else {
            0.0
        };
        (self.beta * intensity + jitter).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub n_iid: usize,
    pub n_ood: usize,
    pub iid: SynthSpec,
    pub ood: SynthSpec,
    /// Shift intensities in `[0, 1]`. When set, each step emits `n_ood` maps
    /// blending a per-sample iD map towards its OoD counterpart.
    #[serde(default)]
    pub ladder: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    /// Relative per-sample jitter of positions, radii and levels.
    #[serde(default = "default_jitter")]
    pub jitter: f64,
    /// Target-mean range `(lo, hi)`. Sample `i` of every population is
    /// rescaled to the same target mean drawn from this range.
    #[serde(default)]
    pub matched_mean: Option<(f64, f64)>,
    #[serde(default)]
    pub risk: RiskModel,
    /// Emit a binary prediction mask `u >= threshold` per sample.
    #[serde(default)]
    pub mask_threshold: Option<f64>,
}

fn default_jitter() -> f64 {
    0.1
}

impl BenchmarkSpec {
    pub fn new(n_iid: usize, n_ood: usize, iid: SynthSpec, ood: SynthSpec, seed: u64) -> Self {
        Self {
            n_iid,
            n_ood,
            iid,
            ood,
            ladder: None,
            seed,
            jitter: default_jitter(),
            matched_mean: None,
            risk: RiskModel::default(),
            mask_threshold: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_iid == 0 || self.n_ood == 0 {
            return Err(Error::InvalidSpec("n_iid and n_ood must be >= 1".into()));
        }
        self.iid.validate()?;
        self.ood.validate()?;
        if self.iid.height != self.ood.height || self.iid.width != self.ood.width {
            return Err(Error::InvalidSpec("iD and OoD specs must share a size".into()));
        }
        if !(self.jitter.is_finite() && (0.0..=1.0).contains(&self.jitter)) {
            return Err(Error::InvalidSpec("jitter must lie in [0, 1]".into()));
        }
        if let Some(ladder) = &self.ladder {
            if ladder.is_empty() || ladder.iter().any(|s| !(0.0..=1.0).contains(s)) {
                return Err(Error::InvalidSpec("ladder intensities must lie in [0, 1]".into()));
            }
        }
        if let Some((lo, hi)) = self.matched_mean {
            if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
                return Err(Error::InvalidSpec("matched_mean needs 0 < lo <= hi <= 1".into()));
            }
        }
        if !(self.risk.beta.is_finite() && self.risk.noise.is_finite() && self.risk.noise >= 0.0) {
            return Err(Error::InvalidSpec("risk model parameters must be finite".into()));
        }
        if let Some(t) = self.mask_threshold {
            check_finite("mask_threshold", t)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub map: UncertaintyMap,
    pub mask: Option<SegmentationMask>,
    pub ood_label: bool,
    pub risk: f64,
    /// Shift intensity: 0 for iD, 1 for OoD, the step value on a ladder.
    pub intensity: f64,
    /// Ladder step, `None` outside ladder populations.
    pub step: Option<usize>,
}

const POP_IID: u32 = 0;
const POP_OOD: u32 = 1;
const POP_TARGET: u32 = 2;
const POP_LADDER_IID: u32 = 3;
const POP_LADDER_OOD: u32 = 4;
const POP_RISK: u32 = 5;

/// Per-sample variant of `spec`: shifted centers, scaled radii and levels,
/// and a fresh noise seed.
fn jittered(spec: &SynthSpec, jitter: f64, rng: &mut rng::Rng) -> SynthSpec {
    let mut u = |scale: f64| if jitter > 0.0 { scale * jitter * rng.gen_range(-1.0..=1.0) } else { 0.0 };
    let (h, w) = (spec.height as f64, spec.width as f64);
    let pattern = match &spec.pattern {
        Pattern::Constant { level } => Pattern::Constant {
            level: level * (1.0 + u(1.0)),
        },
        Pattern::Noise { mean, amplitude } => Pattern::Noise {
            mean: mean * (1.0 + u(1.0)),
            amplitude: *amplitude,
        },
        Pattern::Blob {
            center,
            radius,
            inside,
            outside,
        } => Pattern::Blob {
            center: (center.0 + u(h), center.1 + u(w)),
            radius: radius * (1.0 + u(1.0)),
            inside: inside * (1.0 + u(1.0)),
            outside: *outside,
        },
        Pattern::Ring {
            center,
            inner_radius,
            outer_radius,
            value,
            background,
        } => {
            let scale = 1.0 + u(1.0);
            Pattern::Ring {
                center: (center.0 + u(h), center.1 + u(w)),
                inner_radius: inner_radius * scale,
                outer_radius: outer_radius * scale,
                value: value * (1.0 + u(1.0)),
                background: *background,
            }
        }
        Pattern::Checkerboard { period, low, high } => Pattern::Checkerboard {
            period: *period,
            low: *low,
            high: high * (1.0 + u(1.0)),
        },
    };
    SynthSpec {
        pattern,
        height: spec.height,
        width: spec.width,
        seed: rng.gen(),
    }
}

/// Scales `map` so that its mean is `target`, then clips.
fn rescale_to_mean(map: UncertaintyMap, target: f64) -> UncertaintyMap {
    let mean = avg(&map);
    if mean <= 0.0 {
        return map;
    }
    let (h, w) = map.shape();
    let factor = target / mean;
    UncertaintyMap::from_clipped(h, w, map.into_values().into_iter().map(|v| v * factor).collect())
}

fn blend(a: &UncertaintyMap, b: &UncertaintyMap, s: f64) -> UncertaintyMap {
    let (h, w) = a.shape();
    let values = a.values().iter().zip(b.values()).map(|(x, y)| (1.0 - s) * x + s * y).collect();
    UncertaintyMap::from_clipped(h, w, values)
}

fn threshold_mask(map: &UncertaintyMap, threshold: f64) -> SegmentationMask {
    let (h, w) = map.shape();
    let labels = map.values().iter().map(|&v| u32::from(v >= threshold)).collect();
    SegmentationMask::new(h, w, labels).expect("shape matches map")
}

impl BenchmarkSpec {
    fn population_map(&self, spec: &SynthSpec, population: u32, index: usize) -> Result<UncertaintyMap> {
        let mut rng = rng::stream(self.seed, stream_id(population, index as u32));
        let map = generate(&jittered(spec, self.jitter, &mut rng))?;
        Ok(match self.matched_mean {
            Some((lo, hi)) => {
                let mut t = rng::stream(self.seed, stream_id(POP_TARGET, index as u32));
                rescale_to_mean(map, t.gen_range(lo..=hi))
            }
            None => map,
        })
    }

    fn finish(&self, id: String, map: UncertaintyMap, ood: bool, intensity: f64, step: Option<usize>, key: u32) -> Sample {
        let mut rng = rng::stream(self.seed, stream_id(POP_RISK, key));
        let risk = self.risk.draw(intensity, &mut rng);
        let mask = self.mask_threshold.map(|t| threshold_mask(&map, t));
        Sample {
            id,
            map,
            mask,
            ood_label: ood,
            risk,
            intensity,
            step,
        }
    }
}

/// Generates the iD population followed by either the OoD population or,
/// in ladder mode, one shifted population per ladder step.
pub fn gen_benchmark(spec: &BenchmarkSpec) -> Result<Vec<Sample>> {
    spec.validate()?;
    let total_ood = spec.n_ood * spec.ladder.as_ref().map_or(1, Vec::len);
    let jobs: Vec<usize> = (0..spec.n_iid + total_ood).collect();
    jobs.into_par_iter()
        .map(|j| {
            if j < spec.n_iid {
                let map = spec.population_map(&spec.iid, POP_IID, j)?;
                return Ok(spec.finish(format!("iid_{j:04}"), map, false, 0.0, None, j as u32));
            }
            let k = j - spec.n_iid;
            let key = j as u32;
            match &spec.ladder {
                None => {
                    let map = spec.population_map(&spec.ood, POP_OOD, k)?;
                    Ok(spec.finish(format!("ood_{k:04}"), map, true, 1.0, None, key))
                }
                Some(ladder) => {
                    let (step, i) = (k / spec.n_ood, k % spec.n_ood);
                    let s = ladder[step];
                    let base = spec.population_map(&spec.iid, POP_LADDER_IID, i)?;
                    let target = spec.population_map(&spec.ood, POP_LADDER_OOD, i)?;
                    let map = blend(&base, &target, s);
                    Ok(spec.finish(format!("step{step}_{i:04}"), map, true, s, Some(step), key))
                }
            }
        })
        .collect()
}
