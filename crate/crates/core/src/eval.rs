//! Segmentation metrics: Hungarian matching on pairwise F-measure, overlap
//! and boundary precision/recall/F, and the share of objects segmented with
//! overlap F of at least 0.75.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maskcore::{BinaryMask, LabelImage};

/// Injective partial map from predictions to ground truth:
/// `pairs[i] = Some(j)` matches prediction `i` with ground truth `j`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub pairs: Vec<Option<usize>>,
}

impl Assignment {
    /// Prediction matched to each ground-truth mask.
    pub fn inverse(&self, n_gt: usize) -> Vec<Option<usize>> {
        let mut inv = vec![None; n_gt];
        for (i, j) in self.pairs.iter().enumerate() {
            if let Some(j) = *j {
                inv[j] = Some(i);
            }
        }
        inv
    }
}

/// Pairwise overlap F-measure `2|c∩g| / (|c| + |g|)`.
pub fn pair_f(intersection: usize, pred_area: usize, gt_area: usize) -> f64 {
    if pred_area + gt_area == 0 {
        0.0
    } else {
        2.0 * intersection as f64 / (pred_area + gt_area) as f64
    }
}

fn check_dims(preds: &[BinaryMask], gts: &[BinaryMask]) -> Result<Option<(usize, usize)>> {
    let mut all = preds.iter().chain(gts);
    let Some(first) = all.next() else {
        return Ok(None);
    };
    for m in all {
        if m.dims() != first.dims() {
            return Err(Error::dims(first.dims(), m.dims()));
        }
    }
    Ok(Some(first.dims()))
}

/// `|c_i ∩ g_j|` for every pair.
pub fn intersection_table(preds: &[BinaryMask], gts: &[BinaryMask]) -> Result<Vec<Vec<usize>>> {
    check_dims(preds, gts)?;
    preds
        .iter()
        .map(|p| gts.iter().map(|g| p.intersection_area(g)).collect())
        .collect()
}

/// Assignment maximising the summed pairwise F-measure. Pairs with zero
/// overlap are never reported as matches.
pub fn match_hungarian(preds: &[BinaryMask], gts: &[BinaryMask]) -> Result<Assignment> {
    let inter = intersection_table(preds, gts)?;
    let weights: Vec<Vec<f64>> = preds
        .iter()
        .enumerate()
        .map(|(i, p)| {
            gts.iter()
                .enumerate()
                .map(|(j, g)| pair_f(inter[i][j], p.area(), g.area()))
                .collect()
        })
        .collect();
    let cols = max_weight_assignment(&weights, gts.len());
    Ok(Assignment {
        pairs: cols
            .into_iter()
            .enumerate()
            .map(|(i, j)| j.filter(|&j| inter[i][j] > 0))
            .collect(),
    })
}

/// Maximum-weight assignment of rows to columns of a rectangular
/// non-negative weight table, by the shortest augmenting path method on a
/// square cost table padded with zeros.
pub fn max_weight_assignment(weights: &[Vec<f64>], n_cols: usize) -> Vec<Option<usize>> {
    let n_rows = weights.len();
    let n = n_rows.max(n_cols);
    if n == 0 {
        return Vec::new();
    }
    let cost = |i: usize, j: usize| -> f64 {
        if i < n_rows && j < n_cols {
            -weights[i][j]
        } else {
            0.0
        }
    };
    // 1-based potentials and matching, column 0 is a sentinel
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![None; n_rows];
    for (j, &i) in row_of.iter().enumerate().take(n + 1).skip(1) {
        if i >= 1 && i <= n_rows && j <= n_cols {
            out[i - 1] = Some(j - 1);
        }
    }
    out
}

/// Precision, recall and F-measure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub p: f64,
    pub r: f64,
    pub f: f64,
}

/// Raw sums behind a [`Prf`], kept so that results can be pooled over many
/// images.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrfCounts {
    pub tp_p: usize,
    pub denom_p: usize,
    pub tp_r: usize,
    pub denom_r: usize,
    pub n_pred: usize,
    pub n_gt: usize,
}

impl PrfCounts {
    /// Ratios with the empty-denominator rule: a zero denominator scores 1
    /// when the opposing set is empty too, else 0.
    pub fn prf(&self) -> Prf {
        let ratio = |tp: usize, d: usize, opposing_empty: bool| {
            if d == 0 {
                if opposing_empty { 1.0 } else { 0.0 }
            } else {
                tp as f64 / d as f64
            }
        };
        let p = ratio(self.tp_p, self.denom_p, self.denom_r == 0);
        let r = ratio(self.tp_r, self.denom_r, self.denom_p == 0);
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        Prf { p, r, f }
    }

    pub fn add(&mut self, other: &PrfCounts) {
        self.tp_p += other.tp_p;
        self.denom_p += other.denom_p;
        self.tp_r += other.tp_r;
        self.denom_r += other.denom_r;
        self.n_pred += other.n_pred;
        self.n_gt += other.n_gt;
    }
}

pub fn overlap_counts(preds: &[BinaryMask], gts: &[BinaryMask], a: &Assignment) -> Result<PrfCounts> {
    check_dims(preds, gts)?;
    let mut tp = 0;
    for (i, j) in a.pairs.iter().enumerate() {
        if let Some(j) = *j {
            tp += preds[i].intersection_area(&gts[j])?;
        }
    }
    Ok(PrfCounts {
        tp_p: tp,
        denom_p: preds.iter().map(BinaryMask::area).sum(),
        tp_r: tp,
        denom_r: gts.iter().map(BinaryMask::area).sum(),
        n_pred: preds.len(),
        n_gt: gts.len(),
    })
}

/// `P = Σ|c_i ∩ g(c_i)| / Σ|c_i|`, `R = Σ|c_i ∩ g(c_i)| / Σ|g_j|`.
pub fn overlap_prf(preds: &[BinaryMask], gts: &[BinaryMask], a: &Assignment) -> Result<Prf> {
    Ok(overlap_counts(preds, gts, a)?.prf())
}

pub fn boundary_counts(preds: &[BinaryMask], gts: &[BinaryMask], a: &Assignment, tol: usize) -> Result<PrfCounts> {
    check_dims(preds, gts)?;
    let pb: Vec<BinaryMask> = preds.iter().map(BinaryMask::boundary).collect();
    let gb: Vec<BinaryMask> = gts.iter().map(BinaryMask::boundary).collect();
    let mut tp_p = 0;
    let mut tp_r = 0;
    for (i, j) in a.pairs.iter().enumerate() {
        if let Some(j) = *j {
            tp_p += pb[i].intersection_area(&gb[j].dilate(tol))?;
            tp_r += gb[j].intersection_area(&pb[i].dilate(tol))?;
        }
    }
    Ok(PrfCounts {
        tp_p,
        denom_p: pb.iter().map(BinaryMask::area).sum(),
        tp_r,
        denom_r: gb.iter().map(BinaryMask::area).sum(),
        n_pred: preds.len(),
        n_gt: gts.len(),
    })
}

/// Overlap formulas on mask boundaries, where a boundary pixel counts as
/// matched when it lies within `tol` pixels of the matched mask's boundary.
pub fn boundary_prf(preds: &[BinaryMask], gts: &[BinaryMask], a: &Assignment, tol: usize) -> Result<Prf> {
    Ok(boundary_counts(preds, gts, a, tol)?.prf())
}

/// Number of ground-truth masks whose matched prediction reaches pairwise F
/// of at least 0.75.
pub fn f75_hits(preds: &[BinaryMask], gts: &[BinaryMask], a: &Assignment) -> Result<usize> {
    check_dims(preds, gts)?;
    let mut hits = 0;
    for (i, j) in a.pairs.iter().enumerate() {
        if let Some(j) = *j {
            let inter = preds[i].intersection_area(&gts[j])?;
            // 2I / (|c| + |g|) >= 3/4, in integers
            if 8 * inter >= 3 * (preds[i].area() + gts[j].area()) {
                hits += 1;
            }
        }
    }
    Ok(hits)
}

/// Percentage of ground-truth objects segmented with overlap F >= 0.75.
pub fn f75(preds: &[BinaryMask], gts: &[BinaryMask], a: &Assignment) -> Result<f64> {
    let hits = f75_hits(preds, gts, a)?;
    Ok(f75_percent(hits, preds.len(), gts.len()))
}

fn f75_percent(hits: usize, n_pred: usize, n_gt: usize) -> f64 {
    if n_gt == 0 {
        if n_pred == 0 { 100.0 } else { 0.0 }
    } else {
        100.0 * hits as f64 / n_gt as f64
    }
}

/// `max(1, round(0.0075 * diagonal))`.
pub fn default_tol(width: usize, height: usize) -> usize {
    let diag = libm::hypot(width as f64, height as f64);
    (crate::geom::round_half_up(0.0075 * diag) as usize).max(1)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub overlap_p: f64,
    pub overlap_r: f64,
    pub overlap_f: f64,
    pub boundary_p: f64,
    pub boundary_r: f64,
    pub boundary_f: f64,
    pub f75: f64,
    pub n_pred: usize,
    pub n_gt: usize,
}

/// Everything needed to rebuild a [`MetricsReport`] for one image or a pool
/// of images.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricCounts {
    pub overlap: PrfCounts,
    pub boundary: PrfCounts,
    pub f75_hits: usize,
}

impl MetricCounts {
    pub fn report(&self) -> MetricsReport {
        let o = self.overlap.prf();
        let b = self.boundary.prf();
        MetricsReport {
            overlap_p: o.p,
            overlap_r: o.r,
            overlap_f: o.f,
            boundary_p: b.p,
            boundary_r: b.r,
            boundary_f: b.f,
            f75: f75_percent(self.f75_hits, self.overlap.n_pred, self.overlap.n_gt),
            n_pred: self.overlap.n_pred,
            n_gt: self.overlap.n_gt,
        }
    }

    pub fn add(&mut self, other: &MetricCounts) {
        self.overlap.add(&other.overlap);
        self.boundary.add(&other.boundary);
        self.f75_hits += other.f75_hits;
    }
}

pub fn evaluate_counts(pred: &LabelImage, gt: &LabelImage, tol: usize) -> Result<MetricCounts> {
    if pred.dims() != gt.dims() {
        return Err(Error::dims(pred.dims(), gt.dims()));
    }
    let preds: Vec<BinaryMask> = pred.masks().into_iter().map(|(_, m)| m).collect();
    let gts: Vec<BinaryMask> = gt.masks().into_iter().map(|(_, m)| m).collect();
    let a = match_hungarian(&preds, &gts)?;
    Ok(MetricCounts {
        overlap: overlap_counts(&preds, &gts, &a)?,
        boundary: boundary_counts(&preds, &gts, &a, tol)?,
        f75_hits: f75_hits(&preds, &gts, &a)?,
    })
}

/// Compare a predicted label image with ground truth; id 0 is background.
pub fn evaluate(pred: &LabelImage, gt: &LabelImage, tol: usize) -> Result<MetricsReport> {
    Ok(evaluate_counts(pred, gt, tol)?.report())
}

/// Per-image mean of every field.
pub fn macro_average(reports: &[MetricsReport]) -> Option<MetricsReport> {
    if reports.is_empty() {
        return None;
    }
    let n = reports.len() as f64;
    let mean = |f: fn(&MetricsReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    Some(MetricsReport {
        overlap_p: mean(|r| r.overlap_p),
        overlap_r: mean(|r| r.overlap_r),
        overlap_f: mean(|r| r.overlap_f),
        boundary_p: mean(|r| r.boundary_p),
        boundary_r: mean(|r| r.boundary_r),
        boundary_f: mean(|r| r.boundary_f),
        f75: mean(|r| r.f75),
        n_pred: reports.iter().map(|r| r.n_pred).sum(),
        n_gt: reports.iter().map(|r| r.n_gt).sum(),
    })
}

/// Metrics over the pooled pixel counts of all images.
pub fn micro_average(counts: &[MetricCounts]) -> MetricsReport {
    let mut acc = MetricCounts::default();
    for c in counts {
        acc.add(c);
    }
    acc.report()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sq(x: usize, y: usize, w: usize, h: usize) -> BinaryMask {
        BinaryMask::rect(32, 32, x, y, w, h)
    }

    /// Best total pairwise F over all injective partial maps, as an exact
    /// fraction compared by cross-multiplication.
    fn brute_best(preds: &[BinaryMask], gts: &[BinaryMask]) -> f64 {
        fn go(i: usize, used: &mut Vec<bool>, w: &[Vec<f64>]) -> f64 {
            if i == w.len() {
                return 0.0;
            }
            let mut best = go(i + 1, used, w);
            for j in 0..used.len() {
                if !used[j] {
                    used[j] = true;
                    best = best.max(w[i][j] + go(i + 1, used, w));
                    used[j] = false;
                }
            }
            best
        }
        let w: Vec<Vec<f64>> = preds
            .iter()
            .map(|p| gts.iter().map(|g| pair_f(p.intersection_area(g).unwrap(), p.area(), g.area())).collect())
            .collect();
        go(0, &mut vec![false; gts.len()], &w)
    }

    fn total(preds: &[BinaryMask], gts: &[BinaryMask], a: &Assignment) -> f64 {
        a.pairs
            .iter()
            .enumerate()
            .filter_map(|(i, j)| j.map(|j| pair_f(preds[i].intersection_area(&gts[j]).unwrap(), preds[i].area(), gts[j].area())))
            .sum()
    }

    #[test]
    fn identical_sets_match_identity() {
        let gts = vec![sq(0, 0, 4, 4), sq(10, 10, 5, 3), sq(20, 2, 6, 6)];
        let preds = vec![gts[2].clone(), gts[0].clone(), gts[1].clone()];
        let a = match_hungarian(&preds, &gts).unwrap();
        assert_eq!(a.pairs, vec![Some(2), Some(0), Some(1)]);
        assert_eq!(total(&preds, &gts, &a), 3.0);
    }

    #[test]
    fn one_pred_two_gts_is_injective() {
        let g1 = sq(0, 0, 4, 4);
        let g2 = sq(4, 0, 4, 4);
        let p = g1.union(&g2).unwrap();
        let a = match_hungarian(std::slice::from_ref(&p), &[g1.clone(), g2.clone()]).unwrap();
        assert_eq!(a.pairs.len(), 1);
        assert!(a.pairs[0].is_some());
        // union of two equal-area gts: P = 16/32, R = 16/32
        let prf = overlap_prf(&[p], &[g1, g2], &a).unwrap();
        assert_eq!((prf.p, prf.r, prf.f), (0.5, 0.5, 0.5));
    }

    #[test]
    fn empty_denominator_rule() {
        let g = sq(0, 0, 3, 3);
        let none = Assignment { pairs: vec![] };
        let prf = overlap_prf(&[], std::slice::from_ref(&g), &none).unwrap();
        assert_eq!((prf.p, prf.r, prf.f), (0.0, 0.0, 0.0));
        let prf = overlap_prf(&[], &[], &none).unwrap();
        assert_eq!((prf.p, prf.r, prf.f), (1.0, 1.0, 1.0));
        assert_eq!(f75(&[], &[], &none).unwrap(), 100.0);
        let a = Assignment { pairs: vec![None] };
        assert_eq!(f75(&[g], &[], &a).unwrap(), 0.0);
    }

    #[test]
    fn f75_inclusive_at_three_quarters() {
        // |c∩g| = 3, |c| = |g| = 4 gives F = 0.75 exactly
        let c = BinaryMask::from_pixels(32, 32, [(0, 0), (1, 0), (2, 0), (3, 0)]).unwrap();
        let g = BinaryMask::from_pixels(32, 32, [(0, 0), (1, 0), (2, 0), (5, 5)]).unwrap();
        assert_eq!(c.intersection_area(&g).unwrap(), 3);
        let a = match_hungarian(std::slice::from_ref(&c), std::slice::from_ref(&g)).unwrap();
        assert_eq!(pair_f(3, 4, 4), 0.75);
        assert_eq!(f75(&[c], &[g], &a).unwrap(), 100.0);
    }

    #[test]
    fn f75_counts_unmatched_gts_as_failures() {
        let gts: Vec<_> = (0..5).map(|i| sq(i * 6, 0, 4, 4)).collect();
        let preds = gts[..4].to_vec();
        let a = match_hungarian(&preds, &gts).unwrap();
        assert_eq!(f75(&preds, &gts, &a).unwrap(), 80.0);
    }

    #[test]
    fn boundary_shift_tolerance() {
        let g = sq(5, 5, 8, 8);
        let p = g.translated(1, 0);
        let a = match_hungarian(std::slice::from_ref(&p), std::slice::from_ref(&g)).unwrap();
        let b = boundary_prf(std::slice::from_ref(&p), std::slice::from_ref(&g), &a, 2).unwrap();
        assert_eq!((b.p, b.r), (1.0, 1.0));
        let b0 = boundary_prf(std::slice::from_ref(&p), std::slice::from_ref(&g), &a, 0).unwrap();
        // oracle: boundary pixels of p that are boundary pixels of g
        let ring = |m: &BinaryMask| -> Vec<(usize, usize)> {
            m.iter()
                .filter(|&(x, y)| {
                    [(0i64, 1i64), (0, -1), (1, 0), (-1, 0)].iter().any(|(dx, dy)| {
                        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                        !(0..32).contains(&nx) || !(0..32).contains(&ny) || !m.contains(nx as usize, ny as usize)
                    })
                })
                .collect()
        };
        let (rp, rg) = (ring(&p), ring(&g));
        let common = rp.iter().filter(|q| rg.contains(q)).count();
        assert_eq!(rp.len(), 28);
        assert_eq!(common, 14);
        assert_eq!(b0.p, common as f64 / rp.len() as f64);
        assert_eq!(b0.p, 0.5);
        assert!(b0.p < 1.0);
    }

    #[test]
    fn evaluate_identity_and_permutation() {
        let gt = LabelImage::from_masks(32, 32, &[sq(0, 0, 5, 5), sq(10, 10, 6, 4), sq(20, 20, 3, 7)]).unwrap();
        let r = evaluate(&gt, &gt, 1).unwrap();
        assert_eq!((r.overlap_f, r.boundary_f, r.f75), (1.0, 1.0, 100.0));
        let mut perm = gt.clone();
        for y in 0..32 {
            for x in 0..32 {
                let v = gt.get(x, y);
                perm.set(x, y, if v == 0 { 0 } else { 10 - v });
            }
        }
        assert_eq!(evaluate(&perm, &gt, 1).unwrap(), r);
        assert!(evaluate(&LabelImage::new(8, 8), &gt, 1).is_err());
    }

    #[test]
    fn evaluate_merged_case_by_formula() {
        let g1 = sq(0, 0, 4, 4);
        let g2 = sq(4, 0, 4, 4);
        let gt = LabelImage::from_masks(32, 32, &[g1.clone(), g2.clone()]).unwrap();
        let pred = LabelImage::from_masks(32, 32, &[g1.union(&g2).unwrap()]).unwrap();
        let r = evaluate(&pred, &gt, 1).unwrap();
        assert_eq!((r.overlap_p, r.overlap_r, r.overlap_f), (0.5, 0.5, 0.5));
        // F against the matched gt is 2*16/48 = 2/3 < 0.75
        assert_eq!(r.f75, 0.0);
        assert_eq!((r.n_pred, r.n_gt), (1, 2));
    }

    #[test]
    fn default_tol_of_256() {
        // 0.0075 * hypot(256, 256) = 2.715
        assert_eq!(default_tol(256, 256), 3);
        assert_eq!(default_tol(16, 16), 1);
    }

    #[test]
    fn macro_and_micro_differ() {
        let reports = [
            MetricCounts {
                overlap: PrfCounts { tp_p: 1, denom_p: 1, tp_r: 1, denom_r: 1, n_pred: 1, n_gt: 1 },
                ..Default::default()
            },
            MetricCounts {
                overlap: PrfCounts { tp_p: 0, denom_p: 3, tp_r: 0, denom_r: 3, n_pred: 1, n_gt: 1 },
                ..Default::default()
            },
        ];
        let macro_r = macro_average(&reports.map(|c| c.report())).unwrap();
        assert_eq!(macro_r.overlap_p, 0.5);
        assert_eq!(micro_average(&reports).overlap_p, 0.25);
        assert!(macro_average(&[]).is_none());
    }

    fn masks_strategy() -> impl proptest::strategy::Strategy<Value = Vec<BinaryMask>> {
        proptest::collection::vec((0usize..28, 0usize..28, 1usize..10, 1usize..10), 0..5)
            .prop_map(|v| v.into_iter().map(|(x, y, w, h)| sq(x, y, w.min(32 - x), h.min(32 - y))).collect())
    }

    use proptest::strategy::Strategy;

    proptest::proptest! {
        #[test]
        fn hungarian_is_optimal(preds in masks_strategy(), gts in masks_strategy()) {
            let a = match_hungarian(&preds, &gts).unwrap();
            let mut seen = alloc::collections::BTreeSet::new();
            for j in a.pairs.iter().flatten() {
                proptest::prop_assert!(seen.insert(*j));
            }
            let got = total(&preds, &gts, &a);
            let best = brute_best(&preds, &gts);
            proptest::prop_assert!((got - best).abs() < 1e-12, "{got} {best}");
        }

        #[test]
        fn metric_bounds(preds in masks_strategy(), gts in masks_strategy(), tol in 0usize..3) {
            let a = match_hungarian(&preds, &gts).unwrap();
            for prf in [overlap_prf(&preds, &gts, &a).unwrap(), boundary_prf(&preds, &gts, &a, tol).unwrap()] {
                for v in [prf.p, prf.r, prf.f] {
                    proptest::prop_assert!((0.0..=1.0).contains(&v));
                }
                proptest::prop_assert!(prf.f <= prf.p.max(prf.r) + 1e-12);
                proptest::prop_assert_eq!(prf.f == 0.0, prf.p * prf.r == 0.0);
            }
            let p = f75(&preds, &gts, &a).unwrap();
            proptest::prop_assert!((0.0..=100.0).contains(&p));
        }

        #[test]
        fn unpairing_a_prediction_never_raises_recall(preds in masks_strategy(), gts in masks_strategy()) {
            let a = match_hungarian(&preds, &gts).unwrap();
            let r = overlap_prf(&preds, &gts, &a).unwrap().r;
            if let Some(k) = a.pairs.iter().position(Option::is_some) {
                let mut fewer = a.clone();
                fewer.pairs[k] = None;
                let r2 = overlap_prf(&preds, &gts, &fewer).unwrap().r;
                proptest::prop_assert!(r2 <= r + 1e-12);
            }
        }
    }
}
