//! Rate regions as intersections of half-planes in the nonnegative quadrant.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::error::RegionError;

/// Tolerance for algebraic identities and vertex deduplication.
pub const ALGEBRAIC_TOL: f64 = 1e-12;
/// Tolerance for geometric membership.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// `c1·R1 + c2·R2 ≤ bound`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfPlane {
    pub c1: f64,
    pub c2: f64,
    pub bound: f64,
}

impl HalfPlane {
    pub fn new(c1: f64, c2: f64, bound: f64) -> Self {
        Self { c1, c2, bound }
    }

    /// Amount by which `pt` violates the constraint (negative when strictly inside).
    pub fn excess(&self, pt: RatePair) -> f64 {
        self.c1 * pt.r1 + self.c2 * pt.r2 - self.bound
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePair {
    pub r1: f64,
    pub r2: f64,
}

impl RatePair {
    pub fn new(r1: f64, r2: f64) -> Self {
        Self { r1, r2 }
    }

    pub fn sum(&self) -> f64 {
        self.r1 + self.r2
    }

    pub fn swapped(&self) -> Self {
        Self { r1: self.r2, r2: self.r1 }
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self { r1: k * self.r1, r2: k * self.r2 }
    }

    fn close_to(&self, o: &RatePair, tol: f64) -> bool {
        (self.r1 - o.r1).abs() <= tol && (self.r2 - o.r2).abs() <= tol
    }
}

/// Which bound a region represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegionKind {
    NnNonblind,
    DdOuter,
    NnBlindInner,
}

impl RegionKind {
    pub fn label(&self) -> &'static str {
        match self {
            RegionKind::NnNonblind => "nn-nonblind",
            RegionKind::DdOuter => "dd-outer",
            RegionKind::NnBlindInner => "nn-blind-inner",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [RegionKind::NnNonblind, RegionKind::DdOuter, RegionKind::NnBlindInner]
            .into_iter()
            .find(|k| k.label() == s)
    }

    pub fn region(&self, p: &ChannelParams) -> Result<RateRegion, RegionError> {
        match self {
            RegionKind::NnNonblind => region_nn_nonblind(p),
            RegionKind::DdOuter => region_dd_outer(p),
            RegionKind::NnBlindInner => region_nn_blind_inner(p),
        }
    }
}

/// Convex polygon `{R ≥ 0 : every half-plane holds}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRegion {
    pub halfplanes: Vec<HalfPlane>,
    pub label: String,
}

impl RateRegion {
    /// True iff every half-plane and both axes hold within additive `tol`.
    pub fn contains(&self, pt: RatePair, tol: f64) -> bool {
        pt.r1 >= -tol && pt.r2 >= -tol && self.halfplanes.iter().all(|h| h.excess(pt) <= tol)
    }

    /// Polygon vertices, counterclockwise starting from the origin side.
    pub fn vertices(&self) -> Result<Vec<RatePair>, RegionError> {
        let mut lines = self.halfplanes.clone();
        lines.push(HalfPlane::new(-1.0, 0.0, 0.0));
        lines.push(HalfPlane::new(0.0, -1.0, 0.0));
        let mut pts: Vec<RatePair> = Vec::new();
        for (i, a) in lines.iter().enumerate() {
            for b in &lines[i + 1..] {
                let det = a.c1 * b.c2 - a.c2 * b.c1;
                if det.abs() <= ALGEBRAIC_TOL {
                    continue;
                }
                // Adding 0.0 turns -0.0 into 0.0.
                let pt = RatePair::new(
                    (a.bound * b.c2 - a.c2 * b.bound) / det + 0.0,
                    (a.c1 * b.bound - a.bound * b.c1) / det + 0.0,
                );
                if self.contains(pt, ALGEBRAIC_TOL) && !pts.iter().any(|q| q.close_to(&pt, ALGEBRAIC_TOL)) {
                    pts.push(pt);
                }
            }
        }
        if pts.is_empty() {
            return Err(RegionError::Empty);
        }
        let n = pts.len() as f64;
        let (cx, cy) = pts.iter().fold((0.0, 0.0), |(x, y), p| (x + p.r1 / n, y + p.r2 / n));
        pts.sort_by(|p, q| (p.r2 - cy).atan2(p.r1 - cx).total_cmp(&(q.r2 - cy).atan2(q.r1 - cx)));
        // Rotate so the vertex nearest the origin comes first.
        let first = (0..pts.len())
            .min_by(|&i, &j| (pts[i].sum(), pts[i].r1).partial_cmp(&(pts[j].sum(), pts[j].r1)).unwrap())
            .unwrap_or(0);
        pts.rotate_left(first);
        Ok(pts)
    }

    /// Vertex with the largest sum rate; ties go to the larger `R1`.
    pub fn max_sum_vertex(&self) -> Result<RatePair, RegionError> {
        let v = self.vertices()?;
        let best = v.iter().map(|p| p.sum()).fold(f64::NEG_INFINITY, f64::max);
        v.into_iter()
            .filter(|p| p.sum() >= best - ALGEBRAIC_TOL)
            .max_by(|p, q| p.r1.total_cmp(&q.r1))
            .ok_or(RegionError::Empty)
    }

    /// Largest sum rate over the region.
    pub fn max_sum_rate(&self) -> Result<f64, RegionError> {
        Ok(self.max_sum_vertex()?.sum())
    }

    /// Vertex where both non-axis constraints are active and `R1, R2 > 0`,
    /// if the region has exactly one such vertex.
    pub fn corner(&self) -> Option<RatePair> {
        let v = self.vertices().ok()?;
        let inner: Vec<RatePair> = v
            .into_iter()
            .filter(|p| {
                p.r1 > ALGEBRAIC_TOL
                    && p.r2 > ALGEBRAIC_TOL
                    && self.halfplanes.iter().filter(|h| h.excess(*p).abs() <= ALGEBRAIC_TOL).count() >= 2
            })
            .collect();
        match inner.as_slice() {
            [p] => Some(*p),
            _ => None,
        }
    }
}

/// `ε_other · min{(1−δ_other)/(1−δ_own), 1}`.
fn beta_no(eps_other: f64, delta_other: f64, delta_own: f64) -> f64 {
    let ratio = if delta_own >= 1.0 { 1.0 } else { ((1.0 - delta_other) / (1.0 - delta_own)).min(1.0) };
    eps_other * ratio
}

/// `ε_other (1−δ_other) / (1−δ1δ2)`.
fn beta_delayed(eps_other: f64, delta_other: f64, p: &ChannelParams) -> f64 {
    let den = 1.0 - p.delta1 * p.delta2;
    if den <= 0.0 {
        0.0
    } else {
        eps_other * (1.0 - delta_other) / den
    }
}

/// Capacity region with no CSIT and a transmitter that knows both caches.
pub fn region_nn_nonblind(p: &ChannelParams) -> Result<RateRegion, RegionError> {
    p.validate()?;
    let b1 = beta_no(p.eps2, p.delta2, p.delta1);
    let b2 = beta_no(p.eps1, p.delta1, p.delta2);
    Ok(RateRegion {
        halfplanes: vec![
            HalfPlane::new(b1, 1.0, 1.0 - p.delta2),
            HalfPlane::new(1.0, b2, 1.0 - p.delta1),
        ],
        label: RegionKind::NnNonblind.label().into(),
    })
}

/// Outer bound with delayed CSIT from both receivers.
pub fn region_dd_outer(p: &ChannelParams) -> Result<RateRegion, RegionError> {
    p.validate()?;
    let b1 = beta_delayed(p.eps2, p.delta2, p);
    let b2 = beta_delayed(p.eps1, p.delta1, p);
    Ok(RateRegion {
        halfplanes: vec![
            HalfPlane::new(1.0, 0.0, 1.0 - p.delta1),
            HalfPlane::new(0.0, 1.0, 1.0 - p.delta2),
            HalfPlane::new(b1, 1.0, 1.0 - p.delta2),
            HalfPlane::new(1.0, b2, 1.0 - p.delta1),
        ],
        label: RegionKind::DdOuter.label().into(),
    })
}

/// Achievable region with no CSIT, a blind transmitter, `δ2 ≥ δ1` and Rx1
/// caching all of message 2.
pub fn region_nn_blind_inner(p: &ChannelParams) -> Result<RateRegion, RegionError> {
    p.validate()?;
    if p.delta2 < p.delta1 || p.eps1 != 0.0 {
        return Err(RegionError::Regime(format!(
            "requires delta2 >= delta1 and eps1 = 0, got delta = ({}, {}), eps1 = {}",
            p.delta1, p.delta2, p.eps1
        )));
    }
    let ratio = if p.delta1 >= 1.0 { 1.0 } else { (1.0 - p.delta2) / (1.0 - p.delta1) };
    let coeff = (p.eps2 + p.delta1 * (1.0 - p.eps2)) * ratio;
    Ok(RateRegion {
        halfplanes: vec![
            HalfPlane::new(coeff, 1.0, 1.0 - p.delta2),
            HalfPlane::new(1.0, 0.0, 1.0 - p.delta1),
        ],
        label: RegionKind::NnBlindInner.label().into(),
    })
}

/// Corner reached by the ARQ-plus-fountain scheme with `ε1 = 0`.
pub fn corner_case_b(p: &ChannelParams) -> Result<RatePair, RegionError> {
    p.validate()?;
    if p.eps1 != 0.0 {
        return Err(RegionError::Regime(format!("requires eps1 = 0, got {}", p.eps1)));
    }
    let den = 1.0 - p.delta1 * p.delta2;
    let r2 = if den <= 0.0 { 0.0 } else { (1.0 - p.delta2) * (1.0 - p.eps2 * (1.0 - p.delta1) / den) };
    Ok(RatePair::new(1.0 - p.delta1, r2))
}

/// Per-user rate at the symmetric sum-rate corner with delayed CSIT from both
/// receivers: `(1−δ²)/(1+δ+ε)`.
pub fn dd_symmetric_rate(delta: f64, eps: f64) -> f64 {
    (1.0 - delta * delta) / (1.0 + delta + eps)
}

/// Per-user rate of the blind symmetric scheme without CSIT: `(1−δ)/(1+ε)`.
pub fn nn_blind_symmetric_rate(delta: f64, eps: f64) -> f64 {
    (1.0 - delta) / (1.0 + eps)
}

/// Corner of [`region_nn_blind_inner`] with `R1 = 1−δ1`.
pub fn corner_nn_blind_inner(p: &ChannelParams) -> Result<RatePair, RegionError> {
    let r = region_nn_blind_inner(p)?;
    let h = r.halfplanes[0];
    let r1 = 1.0 - p.delta1;
    Ok(RatePair::new(r1, (h.bound - h.c1 * r1).max(0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(d1: f64, d2: f64, e1: f64, e2: f64) -> ChannelParams {
        ChannelParams::new(d1, d2, e1, e2).unwrap()
    }

    #[test]
    fn nn_max_sum_vertex() {
        let r = region_nn_nonblind(&params(1.0 / 3.0, 0.5, 2.0 / 3.0, 1.0 / 6.0)).unwrap();
        let v = r.max_sum_vertex().unwrap();
        assert!((v.r1 - 4.0 / 11.0).abs() < 1e-12 && (v.r2 - 5.0 / 11.0).abs() < 1e-12, "{v:?}");
    }

    #[test]
    fn rectangle_has_four_ccw_vertices() {
        let r = region_dd_outer(&params(0.2, 0.4, 0.0, 0.0)).unwrap();
        let v = r.vertices().unwrap();
        assert_eq!(v.len(), 4);
        assert!(v[0].close_to(&RatePair::new(0.0, 0.0), 1e-15));
        assert!(v.iter().any(|p| p.close_to(&RatePair::new(0.8, 0.6), 1e-12)));
        // Counterclockwise: positive signed area.
        let area: f64 = (0..v.len())
            .map(|i| {
                let (a, b) = (v[i], v[(i + 1) % v.len()]);
                a.r1 * b.r2 - b.r1 * a.r2
            })
            .sum();
        assert!((area / 2.0 - 0.48).abs() < 1e-12);
    }

    #[test]
    fn inner_regime_is_enforced() {
        assert!(region_nn_blind_inner(&params(0.5, 0.25, 0.0, 0.5)).is_err());
        assert!(region_nn_blind_inner(&params(0.25, 0.5, 0.1, 0.5)).is_err());
    }

    #[test]
    fn degenerate_erasure_still_has_vertices() {
        let r = region_dd_outer(&params(1.0, 1.0, 0.5, 0.5)).unwrap();
        assert_eq!(r.vertices().unwrap(), vec![RatePair::new(0.0, 0.0)]);
        let r = region_nn_nonblind(&params(1.0, 0.5, 0.5, 0.5)).unwrap();
        assert!(r.vertices().unwrap().len() >= 2);
    }
}
