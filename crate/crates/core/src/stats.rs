//! Correlation tables, one-sided t-tests against a global mean,
//! Bonferroni gating and reduction-label distributions.

use std::io::Write;

use crate::annotations::{FrameLabels, FunctionRegion, FunctionTag, LEVEL_COUNT};
use crate::error::{Error, Result};
use crate::midlevel::{feature_index, ContextSpan, FeatureKind, FEATURE_DIM};
use crate::util::fmt6;

/// Entries with |r| above this are kept in the filtered view.
pub const STRONG_CORRELATION: f64 = 0.06;
pub const DEFAULT_ALPHA: f64 = 0.05;
/// Number of function categories tested in one pass.
pub const DEFAULT_COMPARISONS: usize = 9;

/// Sample Pearson correlation.
///
/// Sums are accumulated on values shifted by the first element, which
/// keeps large offsets from cancelling and makes `pearson(x, x)` and
/// `pearson(x, -x)` exactly `1` and `-1`.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::Undefined(format!("correlation of {n} values")));
    }
    let (x0, y0) = (x[0], y[0]);
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - x0, b - y0);
        sx += dx;
        sy += dy;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let nf = n as f64;
    let cxx = sxx - sx * sx / nf;
    let cyy = syy - sy * sy / nf;
    let cxy = sxy - sx * sy / nf;
    if cxx <= 0.0 || cyy <= 0.0 {
        return Err(Error::Undefined("zero variance".into()));
    }
    Ok((cxy / (cxx * cyy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationEntry {
    pub kind: FeatureKind,
    pub span: ContextSpan,
    /// `None` when a column (or the labels) has zero variance.
    pub r: Option<f64>,
    pub n: usize,
}

/// Per-(kind, span) correlations with reduction labels for one
/// language, in kind-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTable {
    pub language: String,
    pub entries: Vec<CorrelationEntry>,
}

impl CorrelationTable {
    pub fn get(&self, kind: FeatureKind, span: ContextSpan) -> &CorrelationEntry {
        &self.entries[feature_index(kind, span)]
    }

    /// Entries with `|r| > 0.06`.
    pub fn strong(&self) -> Vec<&CorrelationEntry> {
        self.entries
            .iter()
            .filter(|e| e.r.is_some_and(|r| r.abs() > STRONG_CORRELATION))
            .collect()
    }

    pub fn undefined(&self) -> Vec<&CorrelationEntry> {
        self.entries.iter().filter(|e| e.r.is_none()).collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W, strong_only: bool) -> std::io::Result<()> {
        writeln!(out, "language,kind,span,r,n")?;
        let rows = if strong_only {
            self.strong()
        } else {
            self.entries.iter().collect()
        };
        for e in rows {
            let r = e.r.map_or_else(|| "NA".to_string(), fmt6);
            writeln!(out, "{},{},{},{},{}", self.language, e.kind, e.span, r, e.n)?;
        }
        Ok(())
    }
}

/// Correlates every feature column with the frame labels. `rows` and
/// `labels` are frame-aligned; unlabeled frames are skipped.
pub fn correlation_table(
    language: &str,
    rows: &[&[f64]],
    labels: &[Option<u8>],
) -> Result<CorrelationTable> {
    if rows.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: rows.len(),
            got: labels.len(),
        });
    }
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); FEATURE_DIM];
    let mut y = Vec::new();
    for (row, label) in rows.iter().zip(labels) {
        let Some(level) = label else { continue };
        if row.len() != FEATURE_DIM {
            return Err(Error::DimensionMismatch {
                expected: FEATURE_DIM,
                got: row.len(),
            });
        }
        for (c, v) in cols.iter_mut().zip(row.iter()) {
            c.push(*v);
        }
        y.push(*level as f64);
    }
    let mut entries = Vec::with_capacity(FEATURE_DIM);
    for kind in FeatureKind::ALL {
        for span in ContextSpan::ALL {
            let col = &cols[feature_index(kind, span)];
            entries.push(CorrelationEntry {
                kind,
                span,
                r: pearson(col, &y).ok(),
                n: y.len(),
            });
        }
    }
    Ok(CorrelationTable {
        language: language.to_string(),
        entries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t: f64,
    /// Upper-tail probability under the null (alternative: mean > mu0).
    pub p: f64,
    pub df: usize,
}

/// One-sample, one-sided t-test of `mean(samples) > mu0`.
pub fn one_sided_t_test(samples: &[f64], mu0: f64) -> Result<TTest> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("t-test needs 2 samples, got {n}")));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let ss: f64 = samples.iter().map(|v| (v - mean) * (v - mean)).sum();
    let sd = (ss / (n - 1) as f64).sqrt();
    let df = n - 1;
    if sd == 0.0 {
        let (t, p) = if mean > mu0 {
            (f64::INFINITY, 0.0)
        } else if mean < mu0 {
            (f64::NEG_INFINITY, 1.0)
        } else {
            (0.0, 0.5)
        };
        return Ok(TTest { t, p, df });
    }
    let t = (mean - mu0) / (sd / (n as f64).sqrt());
    Ok(TTest {
        t,
        p: student_t_upper_tail(t, df),
        df,
    })
}

/// `P(T > t)` for Student's t with `df` degrees of freedom, by adaptive
/// Simpson integration of the density.
pub fn student_t_upper_tail(t: f64, df: usize) -> f64 {
    assert!(df >= 1, "degrees of freedom must be positive");
    if t.is_nan() {
        return f64::NAN;
    }
    if t == 0.0 {
        return 0.5;
    }
    if t < 0.0 {
        return 1.0 - student_t_upper_tail(-t, df);
    }
    if t == f64::INFINITY {
        return 0.0;
    }
    let nu = df as f64;
    let half_power = (nu + 1.0) / 2.0;
    // u = t + s / (1 - s) maps the tail onto s in [0, 1]; with w = 1 - s
    // the integrand f(u) du/ds simplifies to the form below, which is
    // finite at w = 0 and cannot overflow.
    let g = |s: f64| {
        let w = 1.0 - s;
        let q = t * w + s;
        w.powi(df as i32 - 1) / (w * w + q * q / nu).powf(half_power)
    };
    let integral = adaptive_simpson(&g, 0.0, 1.0, 1e-14, 60);
    (density_constant(df) * integral).clamp(0.0, 1.0)
}

/// `Γ((ν+1)/2) / (√(νπ) Γ(ν/2))` via the integer recurrence on the
/// gamma ratio.
fn density_constant(df: usize) -> f64 {
    let pi = std::f64::consts::PI;
    let mut ratio = if df % 2 == 1 { 1.0 / pi.sqrt() } else { pi.sqrt() / 2.0 };
    let mut nu = if df % 2 == 1 { 1 } else { 2 };
    while nu < df {
        ratio *= (nu as f64 + 1.0) / nu as f64;
        nu += 2;
    }
    ratio / (df as f64 * pi).sqrt()
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || (delta.abs() <= 15.0 * tol && b - a < 0.25) {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Survival flags: `p < alpha / m`.
pub fn bonferroni_gate(p_values: &[f64], alpha: f64, m: usize) -> Result<Vec<bool>> {
    if m == 0 {
        return Err(Error::InvalidArgument("Bonferroni m must be at least 1".into()));
    }
    let threshold = alpha / m as f64;
    Ok(p_values.iter().map(|&p| p < threshold).collect())
}

/// Percentages of labeled frames per level, with mean and population
/// standard deviation of the levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReductionDistribution {
    pub percent: [f64; LEVEL_COUNT],
    pub mean: f64,
    pub sd: f64,
    pub frames: usize,
}

fn distribution_from_counts(counts: [usize; LEVEL_COUNT]) -> Option<ReductionDistribution> {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return None;
    }
    let nf = n as f64;
    let mean = (0..LEVEL_COUNT).map(|l| l as f64 * counts[l] as f64).sum::<f64>() / nf;
    let var = (0..LEVEL_COUNT)
        .map(|l| counts[l] as f64 * (l as f64 - mean).powi(2))
        .sum::<f64>()
        / nf;
    Some(ReductionDistribution {
        percent: counts.map(|c| 100.0 * c as f64 / nf),
        mean,
        sd: var.sqrt(),
        frames: n,
    })
}

pub fn reduction_distribution(labels: &[&FrameLabels]) -> Result<ReductionDistribution> {
    let mut counts = [0; LEVEL_COUNT];
    for l in labels.iter().flat_map(|l| l.levels.iter().flatten()) {
        counts[*l as usize] += 1;
    }
    distribution_from_counts(counts)
        .ok_or_else(|| Error::InsufficientData("no labeled frames".into()))
}

/// Function regions of one conversation with that conversation's frame
/// labels, indexed by channel.
#[derive(Debug, Clone, Copy)]
pub struct FunctionSource<'a> {
    pub regions: &'a [FunctionRegion],
    pub labels: &'a [FrameLabels; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct TagStats {
    pub tag: FunctionTag,
    /// Regions overlapping at least one reduction-labeled frame.
    pub n: usize,
    /// Mean of the per-region mean levels.
    pub mean: Option<f64>,
    /// `None` when fewer than two regions qualify.
    pub test: Option<TTest>,
    pub survives_bonferroni: bool,
    /// Percent of the regions' labeled frames at each level.
    pub percent: Option<[f64; LEVEL_COUNT]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionStats {
    pub global_mean: f64,
    pub alpha: f64,
    pub comparisons: usize,
    pub tags: Vec<TagStats>,
}

impl FunctionStats {
    pub fn get(&self, tag: FunctionTag) -> &TagStats {
        self.tags.iter().find(|t| t.tag == tag).expect("every tag present")
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "tag,mean,n,t,p,bonferroni,pct0,pct1,pct2,pct3")?;
        let na = || "NA".to_string();
        for s in &self.tags {
            write!(
                out,
                "{},{},{},{},{},{}",
                s.tag,
                s.mean.map_or_else(na, fmt6),
                s.n,
                s.test.map_or_else(na, |t| fmt6(t.t)),
                s.test.map_or_else(na, |t| fmt6(t.p)),
                u8::from(s.survives_bonferroni),
            )?;
            for l in 0..LEVEL_COUNT {
                write!(out, ",{}", s.percent.map_or_else(na, |p| fmt6(p[l])))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Per-tag reduction statistics. Each qualifying region contributes its
/// mean frame level as one t-test sample against `global_mean`.
pub fn function_stats(
    sources: &[FunctionSource<'_>],
    global_mean: f64,
    alpha: f64,
    comparisons: usize,
) -> Result<FunctionStats> {
    if comparisons == 0 {
        return Err(Error::InvalidArgument("Bonferroni m must be at least 1".into()));
    }
    let mut tags = Vec::with_capacity(FunctionTag::ALL.len());
    for tag in FunctionTag::ALL {
        let mut samples = Vec::new();
        let mut counts = [0usize; LEVEL_COUNT];
        for src in sources {
            for r in src.regions.iter().filter(|r| r.tag == tag) {
                let labels = &src.labels[r.channel.index()];
                let mut region_counts = [0usize; LEVEL_COUNT];
                for f in r.frames() {
                    if let Some(l) = labels.get(f) {
                        region_counts[l as usize] += 1;
                    }
                }
                let k: usize = region_counts.iter().sum();
                if k == 0 {
                    continue;
                }
                let total: usize = (0..LEVEL_COUNT).map(|l| l * region_counts[l]).sum();
                samples.push(total as f64 / k as f64);
                for l in 0..LEVEL_COUNT {
                    counts[l] += region_counts[l];
                }
            }
        }
        let test = one_sided_t_test(&samples, global_mean).ok();
        let survives = match test {
            Some(t) => bonferroni_gate(&[t.p], alpha, comparisons)?[0],
            None => false,
        };
        tags.push(TagStats {
            tag,
            n: samples.len(),
            mean: (!samples.is_empty())
                .then(|| samples.iter().sum::<f64>() / samples.len() as f64),
            test,
            survives_bonferroni: survives,
            percent: distribution_from_counts(counts).map(|d| d.percent),
        });
    }
    Ok(FunctionStats {
        global_mean,
        alpha,
        comparisons,
        tags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal_io::Channel;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ContinuousCDF, StudentsT};

    /// Two-pass textbook definition.
    fn pearson_oracle(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
        cov / (vx * vy).sqrt()
    }

    /// Upper tail by fixed-grid Simpson over θ = atan(u) in
    /// [atan(t), π/2), normalized by the same rule over (-π/2, π/2).
    fn t_tail_oracle(t: f64, df: usize) -> f64 {
        let nu = df as f64;
        let h = |th: f64| {
            let u = th.tan();
            let c = th.cos();
            (1.0 + u * u / nu).powf(-(nu + 1.0) / 2.0) / (c * c)
        };
        let simpson = |a: f64, b: f64| {
            let n = 200_000;
            let step = (b - a) / n as f64;
            let mut s = h(a) + h(b - 1e-15);
            for i in 1..n {
                s += h(a + i as f64 * step) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            s * step / 3.0
        };
        let half = std::f64::consts::FRAC_PI_2;
        simpson(t.atan(), half - 1e-12) / simpson(-half + 1e-12, half - 1e-12)
    }

    #[test]
    fn pearson_examples() {
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        let r = pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 5.0]).unwrap();
        assert!((r - pearson_oracle(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 5.0])).abs() < 1e-12);
        assert!((r - 0.8315).abs() < 1e-4);
    }

    #[test]
    fn pearson_undefined_cases() {
        assert!(matches!(pearson(&[1.0], &[2.0]), Err(Error::Undefined(_))));
        assert!(matches!(pearson(&[1.0, 1.0], &[2.0, 3.0]), Err(Error::Undefined(_))));
        assert!(matches!(
            pearson(&[1.0, 2.0], &[2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn pearson_matches_definition_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..300 {
            let n = rng.random_range(2..200);
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-50.0..50.0)).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0) + x[0] * 0.1).collect();
            let r = pearson(&x, &y).unwrap();
            assert!((r - pearson_oracle(&x, &y)).abs() < 1e-10);
        }
    }

    proptest! {
        #[test]
        fn pearson_symmetric_and_affine(
            pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 3..60),
            a in 0.1f64..10.0,
            b in -100.0f64..100.0,
        ) {
            let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            if let Ok(r) = pearson(&x, &y) {
                prop_assert!(r.abs() <= 1.0);
                prop_assert!((r - pearson(&y, &x).unwrap()).abs() < 1e-12);
                let ax: Vec<f64> = x.iter().map(|v| a * v + b).collect();
                prop_assert!((r - pearson(&ax, &y).unwrap()).abs() < 1e-9);
                let nx: Vec<f64> = x.iter().map(|v| -a * v).collect();
                prop_assert!((r + pearson(&nx, &y).unwrap()).abs() < 1e-9);
            }
        }

        #[test]
        fn t_test_p_decreases_with_mean(shift in 0.0f64..3.0, step in 0.01f64..1.0) {
            let base = [0.3, -0.2, 0.9, 0.1, -0.6];
            let at = |d: f64| {
                let s: Vec<f64> = base.iter().map(|v| v + d).collect();
                one_sided_t_test(&s, 0.0).unwrap().p
            };
            prop_assert!(at(shift + step) < at(shift));
        }

        #[test]
        fn bonferroni_survivors_subset(ps in prop::collection::vec(0.0f64..1.0, 0..30), m in 1usize..20) {
            let gated = bonferroni_gate(&ps, 0.05, m).unwrap();
            let raw = bonferroni_gate(&ps, 0.05, 1).unwrap();
            for (g, r) in gated.iter().zip(&raw) {
                prop_assert!(!g || *r);
            }
        }
    }

    #[test]
    fn t_test_example() {
        let r = one_sided_t_test(&[1.0, 2.0, 3.0, 4.0, 5.0], 2.0).unwrap();
        assert!((r.t - 2f64.sqrt()).abs() < 1e-12);
        assert!((r.p - t_tail_oracle(r.t, 4)).abs() < 1e-9);
        assert!((r.p - 0.1151).abs() < 1e-3);
    }

    #[test]
    fn t_test_degenerate_rules() {
        assert_eq!(one_sided_t_test(&[3.0, 3.0, 3.0], 1.0).unwrap().p, 0.0);
        assert_eq!(one_sided_t_test(&[3.0, 3.0, 3.0], 5.0).unwrap().p, 1.0);
        let z = one_sided_t_test(&[2.0, 2.0], 2.0).unwrap();
        assert_eq!((z.t, z.p), (0.0, 0.5));
        assert!(one_sided_t_test(&[1.0], 0.0).is_err());
    }

    #[test]
    fn t_tail_matches_oracles() {
        for df in [1, 2, 3, 4, 7, 10, 30, 49, 200] {
            for t in [-3.0, -0.5, 0.0, 0.3, 1.0, 2.5, 6.0, 20.0] {
                let p = student_t_upper_tail(t, df);
                let q = 1.0 - StudentsT::new(0.0, 1.0, df as f64).unwrap().cdf(t);
                assert!((p - q).abs() < 1e-9, "df {df} t {t}: {p} vs {q}");
                if df <= 50 {
                    let o = t_tail_oracle(t, df);
                    assert!((p - o).abs() < 1e-8, "df {df} t {t}: {p} vs {o}");
                }
            }
        }
        assert_eq!(student_t_upper_tail(0.0, 5), 0.5);
    }

    #[test]
    fn bonferroni_examples() {
        assert_eq!(
            bonferroni_gate(&[0.011, 0.0009], 0.05, 9).unwrap(),
            vec![false, true]
        );
        assert_eq!(
            bonferroni_gate(&[0.04, 0.06], 0.05, 1).unwrap(),
            vec![true, false]
        );
        assert!(bonferroni_gate(&[1.0, 1.0], 0.05, 3).unwrap().iter().all(|s| !s));
        assert!(bonferroni_gate(&[0.1], 0.05, 0).is_err());
    }

    fn labels_from_counts(counts: [usize; 4]) -> FrameLabels {
        FrameLabels {
            levels: (0..4u8)
                .flat_map(|l| std::iter::repeat_n(Some(l), counts[l as usize]))
                .collect(),
        }
    }

    #[test]
    fn distribution_examples() {
        let d = reduction_distribution(&[&labels_from_counts([10, 0, 0, 0])]).unwrap();
        assert_eq!((d.percent, d.mean, d.sd), ([100.0, 0.0, 0.0, 0.0], 0.0, 0.0));
        let d = reduction_distribution(&[&labels_from_counts([5, 5, 5, 5])]).unwrap();
        assert_eq!((d.percent, d.mean), ([25.0; 4], 1.5));
        let d = reduction_distribution(&[&labels_from_counts([35, 38, 21, 6])]).unwrap();
        assert!((d.mean - 0.98).abs() < 1e-12);
        assert!((d.sd - 0.8942).abs() < 1e-4);
        assert!(reduction_distribution(&[&FrameLabels::unlabeled(5)]).is_err());
    }

    fn fregion(tag: FunctionTag, start_ms: u64, end_ms: u64) -> FunctionRegion {
        FunctionRegion {
            channel: Channel::Left,
            start_ms,
            end_ms,
            tag,
        }
    }

    #[test]
    fn function_stats_on_reduced_regions() {
        let labels = [labels_from_counts([0, 0, 300, 0]), FrameLabels::unlabeled(300)];
        let regions: Vec<_> = (0..3).map(|i| fregion(FunctionTag::UC, i * 1000, i * 1000 + 500)).collect();
        let stats = function_stats(
            &[FunctionSource {
                regions: &regions,
                labels: &labels,
            }],
            0.98,
            DEFAULT_ALPHA,
            DEFAULT_COMPARISONS,
        )
        .unwrap();
        let uc = stats.get(FunctionTag::UC);
        assert_eq!(uc.n, 3);
        assert_eq!(uc.mean, Some(2.0));
        assert!(uc.test.unwrap().p < 0.05);
        assert_eq!(uc.percent, Some([0.0, 0.0, 100.0, 0.0]));
        let po = stats.get(FunctionTag::PO);
        assert_eq!((po.n, po.mean, po.test, po.percent), (0, None, None, None));
        assert_eq!(stats.tags.len(), 11);
    }

    #[test]
    fn regions_without_labels_are_excluded() {
        let mut labels = [FrameLabels::unlabeled(100), FrameLabels::unlabeled(100)];
        labels[0].levels[10] = Some(3);
        let regions = [fregion(FunctionTag::TC, 50, 150), fregion(FunctionTag::TC, 500, 600)];
        let stats = function_stats(
            &[FunctionSource {
                regions: &regions,
                labels: &labels,
            }],
            0.98,
            DEFAULT_ALPHA,
            DEFAULT_COMPARISONS,
        )
        .unwrap();
        let tc = stats.get(FunctionTag::TC);
        assert_eq!(tc.n, 1);
        assert!(tc.test.is_none());
    }

    #[test]
    fn tiling_regions_reproduce_distribution() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let labels = FrameLabels {
            levels: (0..400).map(|_| Some(rng.random_range(0..4u8))).collect(),
        };
        let regions: Vec<_> = (0..8).map(|i| fregion(FunctionTag::PF, i * 500, i * 500 + 500)).collect();
        let both = [labels.clone(), FrameLabels::unlabeled(400)];
        let stats = function_stats(
            &[FunctionSource {
                regions: &regions,
                labels: &both,
            }],
            1.0,
            DEFAULT_ALPHA,
            DEFAULT_COMPARISONS,
        )
        .unwrap();
        let d = reduction_distribution(&[&labels]).unwrap();
        let pct = stats.get(FunctionTag::PF).percent.unwrap();
        for (a, b) in pct.iter().zip(&d.percent) {
            assert!((a - b).abs() < 1e-9);
        }
        // equal-size regions: mean of region means equals the frame mean
        assert!((stats.get(FunctionTag::PF).mean.unwrap() - d.mean).abs() < 1e-12);
    }

    #[test]
    fn correlation_table_identity_and_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let labels: Vec<Option<u8>> = (0..500)
            .map(|i| (i % 7 != 0).then(|| rng.random_range(0..4)))
            .collect();
        let rows: Vec<Vec<f64>> = labels
            .iter()
            .map(|l| {
                let mut row: Vec<f64> = (0..FEATURE_DIM).map(|_| rng.random::<f64>()).collect();
                row[feature_index(FeatureKind::Cr, ContextSpan::C)] = l.unwrap_or(9) as f64;
                row[feature_index(FeatureKind::Sf, ContextSpan::A)] = 1.0;
                row
            })
            .collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let t = correlation_table("en", &refs, &labels).unwrap();
        let e = t.get(FeatureKind::Cr, ContextSpan::C);
        assert_eq!(e.r, Some(1.0));
        assert_eq!(e.n, labels.iter().flatten().count());
        assert_eq!(t.get(FeatureKind::Sf, ContextSpan::A).r, None);
        assert!(t.strong().iter().all(|e| e.r.unwrap().abs() > STRONG_CORRELATION));
        let mut buf = Vec::new();
        t.write_csv(&mut buf, false).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), FEATURE_DIM + 1);
        assert!(text.contains("en,sf,A,NA,"));
    }

    #[test]
    fn independent_labels_correlate_weakly() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 100_000;
        let labels: Vec<Option<u8>> = (0..n).map(|_| Some(rng.random_range(0..4))).collect();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..FEATURE_DIM).map(|_| rng.random::<f64>()).collect())
            .collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let t = correlation_table("es", &refs, &labels).unwrap();
        // sd of r under independence is 1/sqrt(n) ~ 0.0032
        assert!(t.entries.iter().all(|e| e.r.unwrap().abs() < 0.02));
    }
}
