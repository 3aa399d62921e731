//! Local spatial measures on 3×3 windows, spatial decomposition and the
//! spatial mass ratio (SMR) aggregators.
//!
//! Every measure sees the map padded by one pixel on each side, the pad
//! replicating the nearest edge value. A pixel's weight depends only on its
//! own window, so row-parallel evaluation is bit-identical to the
//! sequential sweep.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::map::UncertaintyMap;

pub const DEFAULT_EDS_TAU: f64 = 0.2;
pub const DEFAULT_ENTROPY_BINS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpatialMeasure {
    /// Window Moran's I (queen adjacency), clamped to `[0, 1]`.
    Moran,
    /// Fraction of window pixels whose normalized Sobel magnitude exceeds `tau`.
    EdgeDensity { tau: f64 },
    /// Histogram entropy of the window over `bins` equal-width bins.
    Entropy { bins: usize },
}

impl SpatialMeasure {
    pub fn eds() -> Self {
        SpatialMeasure::EdgeDensity {
            tau: DEFAULT_EDS_TAU,
        }
    }

    pub fn entropy() -> Self {
        SpatialMeasure::Entropy {
            bins: DEFAULT_ENTROPY_BINS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SpatialMeasure::Moran => Ok(()),
            SpatialMeasure::EdgeDensity { tau } if tau > 0.0 && tau < 1.0 => Ok(()),
            SpatialMeasure::EdgeDensity { tau } => Err(Error::InvalidParam(format!(
                "edge threshold {tau} must lie in (0, 1)"
            ))),
            SpatialMeasure::Entropy { bins } if bins >= 2 => Ok(()),
            SpatialMeasure::Entropy { bins } => Err(Error::InvalidParam(format!(
                "entropy needs at least 2 bins, got {bins}"
            ))),
        }
    }
}

/// Per-pixel local spatial measure, same shape as its source map.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMap {
    height: usize,
    width: usize,
    weights: Vec<f64>,
    measure: SpatialMeasure,
}

impl WeightMap {
    /// Wraps explicit weights; every weight must be finite and in `[0, 1]`.
    pub fn new(
        height: usize,
        width: usize,
        weights: Vec<f64>,
        measure: SpatialMeasure,
    ) -> Result<Self> {
        // reuse the map validation for range/finiteness checks
        let checked = UncertaintyMap::new(height, width, weights)?;
        Ok(Self {
            height,
            width,
            weights: checked.into_values(),
            measure,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn measure(&self) -> SpatialMeasure {
        self.measure
    }
}

/// Pads `map` with `layers` rings replicating the nearest edge pixel.
fn padded(map: &UncertaintyMap, layers: usize) -> (usize, Vec<f64>) {
    let (h, w) = map.shape();
    let pw = w + 2 * layers;
    let ph = h + 2 * layers;
    let mut out = Vec::with_capacity(ph * pw);
    for pr in 0..ph {
        let r = pr.saturating_sub(layers).min(h - 1);
        for pc in 0..pw {
            let c = pc.saturating_sub(layers).min(w - 1);
            out.push(map.get(r, c));
        }
    }
    (pw, out)
}

/// Gathers the 3×3 window centred at padded position `(r, c)`.
#[inline]
fn window(buf: &[f64], stride: usize, r: usize, c: usize) -> [f64; 9] {
    let mut win = [0.0; 9];
    for dr in 0..3 {
        let base = (r + dr - 1) * stride + c - 1;
        win[dr * 3..dr * 3 + 3].copy_from_slice(&buf[base..base + 3]);
    }
    win
}

/// Unordered queen-adjacent index pairs inside a 3×3 window.
const QUEEN_PAIRS: [(usize, usize); 20] = {
    let mut pairs = [(0, 0); 20];
    let mut n = 0;
    let mut a = 0;
    while a < 9 {
        let mut b = a + 1;
        while b < 9 {
            let (ra, ca) = ((a / 3) as isize, (a % 3) as isize);
            let (rb, cb) = ((b / 3) as isize, (b % 3) as isize);
            let dr = if ra > rb { ra - rb } else { rb - ra };
            let dc = if ca > cb { ca - cb } else { cb - ca };
            if dr <= 1 && dc <= 1 {
                pairs[n] = (a, b);
                n += 1;
            }
            b += 1;
        }
        a += 1;
    }
    pairs
};

/// Moran's I of a 3×3 window with binary queen weights, clamped to `[0, 1]`.
/// A constant window is perfectly autocorrelated and scores 1.
pub fn window_moran(win: &[f64; 9]) -> f64 {
    let first = win[0];
    if win.iter().all(|&x| x == first) {
        return 1.0;
    }
    let mean = win.iter().sum::<f64>() / 9.0;
    let z: [f64; 9] = std::array::from_fn(|i| win[i] - mean);
    let denom: f64 = z.iter().map(|d| d * d).sum();
    if denom <= 0.0 {
        return 1.0;
    }
    let cross: f64 = QUEEN_PAIRS.iter().map(|&(a, b)| 2.0 * z[a] * z[b]).sum();
    let s0 = 2.0 * QUEEN_PAIRS.len() as f64;
    let i = (9.0 / s0) * cross / denom;
    i.clamp(0.0, 1.0)
}

/// Normalized Shannon entropy of a 3×3 window histogram.
pub fn window_entropy(win: &[f64; 9], bins: usize) -> f64 {
    let mut counts = vec![0usize; bins];
    for &x in win {
        counts[bin_index(x, bins)] += 1;
    }
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / 9.0;
            -p * p.ln()
        })
        .fold(0.0, |acc, t| acc + t);
    (h / (bins as f64).ln()).clamp(0.0, 1.0)
}

/// Bins are `[l, r)` except the last, which also holds 1.0.
fn bin_index(x: f64, bins: usize) -> usize {
    ((x * bins as f64).floor() as usize).min(bins - 1)
}

/// Sobel gradient magnitude scaled so a unit step yields 1, evaluated over
/// the padded map (padded twice so the pad ring has a full stencil).
/// Returns the `(h+2) × (w+2)` magnitude grid.
fn sobel_magnitude(map: &UncertaintyMap) -> (usize, Vec<f64>) {
    let (h, w) = map.shape();
    let (stride2, buf) = padded(map, 2);
    let ph = h + 2;
    let pw = w + 2;
    let mut mag = vec![0.0; ph * pw];
    mag.par_chunks_mut(pw).enumerate().for_each(|(r, out)| {
        for (c, o) in out.iter_mut().enumerate() {
            let win = window(&buf, stride2, r + 1, c + 1);
            let gx = (win[2] + 2.0 * win[5] + win[8]) - (win[0] + 2.0 * win[3] + win[6]);
            let gy = (win[6] + 2.0 * win[7] + win[8]) - (win[0] + 2.0 * win[1] + win[2]);
            *o = (gx * gx + gy * gy).sqrt() / 4.0;
        }
    });
    (pw, mag)
}

/// Local spatial weight for every pixel of `map`.
pub fn spatial_weight_map(map: &UncertaintyMap, measure: SpatialMeasure) -> Result<WeightMap> {
    measure.validate()?;
    let (h, w) = map.shape();
    let mut weights = vec![0.0; h * w];
    match measure {
        SpatialMeasure::Moran | SpatialMeasure::Entropy { .. } => {
            let (stride, buf) = padded(map, 1);
            weights.par_chunks_mut(w).enumerate().for_each(|(r, out)| {
                for (c, o) in out.iter_mut().enumerate() {
                    let win = window(&buf, stride, r + 1, c + 1);
                    *o = match measure {
                        SpatialMeasure::Moran => window_moran(&win),
                        SpatialMeasure::Entropy { bins } => window_entropy(&win, bins),
                        SpatialMeasure::EdgeDensity { .. } => unreachable!(),
                    };
                }
            });
        }
        SpatialMeasure::EdgeDensity { tau } => {
            let (stride, mag) = sobel_magnitude(map);
            weights.par_chunks_mut(w).enumerate().for_each(|(r, out)| {
                for (c, o) in out.iter_mut().enumerate() {
                    let win = window(&mag, stride, r + 1, c + 1);
                    *o = win.iter().filter(|&&g| g > tau).count() as f64 / 9.0;
                }
            });
        }
    }
    Ok(WeightMap {
        height: h,
        width: w,
        weights,
        measure,
    })
}

/// Splits `U` into `U ⊙ W` and `U ⊙ (1 − W)`.
pub fn spatial_decompose(
    map: &UncertaintyMap,
    weights: &WeightMap,
) -> Result<(UncertaintyMap, UncertaintyMap)> {
    check_shapes(map, weights)?;
    let (h, w) = map.shape();
    let high: Vec<f64> = map
        .values()
        .iter()
        .zip(weights.weights())
        .map(|(u, w)| u * w)
        .collect();
    let low: Vec<f64> = map
        .values()
        .iter()
        .zip(&high)
        .map(|(u, hi)| u - hi)
        .collect();
    Ok((
        UncertaintyMap::from_clipped(h, w, high),
        UncertaintyMap::from_clipped(h, w, low),
    ))
}

/// Spatial mass ratio `Σ u·w / Σ u`; 0 for a map without uncertainty mass.
pub fn smr(map: &UncertaintyMap, weights: &WeightMap) -> Result<f64> {
    check_shapes(map, weights)?;
    let total = map.sum();
    if total <= 0.0 {
        log::warn!("spatial mass ratio of a zero-mass map is reported as 0");
        return Ok(0.0);
    }
    let weighted: f64 = map
        .values()
        .iter()
        .zip(weights.weights())
        .map(|(u, w)| u * w)
        .sum();
    Ok((weighted / total).clamp(0.0, 1.0))
}

fn smr_with(map: &UncertaintyMap, measure: SpatialMeasure) -> Result<f64> {
    let w = spatial_weight_map(map, measure)?;
    smr(map, &w)
}

/// SMR under window Moran's I.
pub fn mor(map: &UncertaintyMap) -> f64 {
    smr_with(map, SpatialMeasure::Moran).expect("default Moran parameters are valid")
}

/// SMR under edge density with threshold `tau`.
pub fn eds(map: &UncertaintyMap, tau: f64) -> Result<f64> {
    smr_with(map, SpatialMeasure::EdgeDensity { tau })
}

/// SMR under local histogram entropy with `bins` bins.
pub fn ent(map: &UncertaintyMap, bins: usize) -> Result<f64> {
    smr_with(map, SpatialMeasure::Entropy { bins })
}

fn check_shapes(map: &UncertaintyMap, weights: &WeightMap) -> Result<()> {
    if map.shape() != weights.shape() {
        return Err(Error::ShapeMismatch {
            left: map.shape(),
            right: weights.shape(),
        });
    }
    Ok(())
}
