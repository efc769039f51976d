//! Closed-form evaluators for idealized cluster geometries and a bridge that
//! realizes those geometries as synthetic datasets for the real detectors.
//!
//! The closed forms describe the expected local-outlier-factor of a member of
//! a tight cluster of a given size, and the probability that a uniform
//! threshold split lands in a gap. Each proposition checker validates its
//! premises and, when they hold, emits the predicted values and an ordering
//! verdict; premise violations produce a no-verdict result rather than an
//! error.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, DatasetMeta, FeatureRole, GroupLabel};
use crate::error::{Error, Result};

/// Idealized two-group cluster geometry.
///
/// Distances are average pairwise distances: `intra_*` within a group's
/// inlier population (clustered outliers share it), `outlier_intra_*` within
/// one scattered outlier neighborhood, `gap_*` between a group's inliers and
/// outliers, and `proxy_gap` between group-b subpopulations along the proxy
/// axes. Subpopulation counts fragment group b (and, for scattered
/// neighborhoods, group a's outliers).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdealGeometry {
    pub n_a: usize,
    pub n_b: usize,
    pub base_rate: f64,
    pub intra_a: f64,
    pub intra_b: f64,
    pub gap_a: f64,
    pub gap_b: f64,
    #[serde(default)]
    pub proxy_gap: Option<f64>,
    #[serde(default)]
    pub outlier_intra_a: Option<f64>,
    #[serde(default)]
    pub outlier_intra_b: Option<f64>,
    #[serde(default = "one")]
    pub a_outlier_subpops: usize,
    #[serde(default = "one")]
    pub b_inlier_subpops: usize,
    #[serde(default = "one")]
    pub b_outlier_subpops: usize,
    /// Largest scattered local-neighborhood size (`m`).
    #[serde(default)]
    pub neighborhood_size: Option<usize>,
    /// Inlier neighbors mixed into a dissolved neighborhood (`alpha`).
    #[serde(default)]
    pub inlier_neighbors: Option<usize>,
    pub k: usize,
    /// Total embedding dimension used by `realize_geometry`.
    pub dims: usize,
    /// Span of the splitting axis for split-probability values; derived from
    /// the gaps when absent.
    #[serde(default)]
    pub split_range: Option<f64>,
}

fn one() -> usize {
    1
}

impl IdealGeometry {
    pub fn outliers_a(&self) -> usize {
        (self.base_rate * self.n_a as f64).round() as usize
    }

    pub fn outliers_b(&self) -> usize {
        (self.base_rate * self.n_b as f64).round() as usize
    }
}

/// Which group the detector is predicted to score or flag higher.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    GroupAHigher,
    GroupBHigher,
    Equal,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::GroupAHigher => "a_higher",
            Verdict::GroupBHigher => "b_higher",
            Verdict::Equal => "equal",
        })
    }
}

/// Outcome of one closed-form check.
#[derive(Debug, Clone, Serialize)]
pub struct TheoryPrediction {
    pub premises_hold: bool,
    pub premise_failures: Vec<String>,
    pub values: Vec<(String, f64)>,
    pub verdict: Option<Verdict>,
    pub notes: Vec<String>,
}

impl TheoryPrediction {
    fn premise_failure(failures: Vec<String>) -> TheoryPrediction {
        TheoryPrediction {
            premises_hold: false,
            premise_failures: failures,
            values: Vec::new(),
            verdict: None,
            notes: Vec::new(),
        }
    }
}

fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Expected factor of a member of a tight cluster of `cluster_size` points at
/// distance `gap` from the bulk, with intra-cluster distance `intra`.
///
/// Below the masking threshold (`k <= cluster_size`) the neighborhood stays
/// inside the cluster and the expected factor is 1; above it the neighborhood
/// pulls in `k - cluster_size` bulk points whose reachability is `intra`.
pub fn expected_lof_clustered(cluster_size: f64, k: usize, gap: f64, intra: f64) -> Result<f64> {
    if !(intra > 0.0) || !(gap > 0.0) {
        return Err(Error::Geometry(format!(
            "distances must be positive; got gap={gap}, intra={intra}"
        )));
    }
    if gap < intra {
        return Err(Error::Geometry(format!(
            "gap {gap} must be at least the intra distance {intra}"
        )));
    }
    if k == 0 {
        return Err(Error::Config("neighbor count must be positive".into()));
    }
    let k = k as f64;
    if k <= cluster_size {
        return Ok(1.0);
    }
    Ok((cluster_size / gap + (k - cluster_size) / intra) / (k / gap))
}

/// Probability that a uniform split lands in a gap of the given width; the
/// multi-dimensional form is the per-axis product for axis-replicated gaps.
pub fn split_probability(gap: f64, range: f64, dims: usize) -> Result<f64> {
    if !(gap > 0.0) || !(range > 0.0) {
        return Err(Error::Geometry(format!("gap and range must be positive; got {gap}, {range}")));
    }
    if gap > range {
        return Err(Error::Geometry(format!("gap {gap} exceeds range {range}")));
    }
    if dims == 0 {
        return Err(Error::Config("dims must be at least 1".into()));
    }
    Ok((gap / range).powi(dims as i32))
}

/// Masking threshold for one outlier cluster: the factor separates outliers
/// only when the neighbor count exceeds the cluster size.
pub fn check_lemma1(geom: &IdealGeometry) -> Result<TheoryPrediction> {
    let size = geom.outliers_a() as f64;
    let masked = geom.k as f64 <= size;
    let expected = expected_lof_clustered(size, geom.k, geom.gap_a, geom.intra_a)?;
    let mut notes = vec![
        "neighbor count must exceed the outlier-cluster size to bypass masking".to_string(),
    ];
    if masked {
        notes.push(format!(
            "k={} <= outlier cluster size {size}: outliers and inliers share expected factor 1",
            geom.k
        ));
    }
    Ok(TheoryPrediction {
        premises_hold: true,
        premise_failures: Vec::new(),
        values: vec![
            ("masking_threshold".into(), size),
            ("expected_outlier_lof".into(), expected),
        ],
        verdict: None,
        notes,
    })
}

/// Multi-cluster masking threshold: the neighbor count must exceed the
/// largest micro-cluster.
pub fn check_lemma2(geom: &IdealGeometry) -> Result<TheoryPrediction> {
    if geom.b_outlier_subpops == 0 {
        return Err(Error::Config("at least one outlier subpopulation required".into()));
    }
    let largest =
        (geom.outliers_b() as f64 / geom.b_outlier_subpops as f64).ceil();
    let expected = expected_lof_clustered(largest, geom.k, geom.gap_b, geom.intra_b)?;
    Ok(TheoryPrediction {
        premises_hold: true,
        premise_failures: Vec::new(),
        values: vec![
            ("masking_threshold".into(), largest),
            ("expected_outlier_lof".into(), expected),
        ],
        verdict: None,
        notes: vec!["the neighbor count must exceed every micro-cluster size".to_string()],
    })
}

/// Density variation: the sparser group's clustered outliers earn lower
/// factors, and they mask entirely once the gap shrinks to the intra scale.
pub fn check_prop1(geom: &IdealGeometry) -> Result<TheoryPrediction> {
    let mut failures = Vec::new();
    if geom.n_a != geom.n_b {
        failures.push(format!("groups must have equal size; got {} vs {}", geom.n_a, geom.n_b));
    }
    if !approx_eq(geom.gap_a, geom.gap_b) {
        failures.push(format!(
            "inlier-outlier gaps must match; got {} vs {}",
            geom.gap_a, geom.gap_b
        ));
    }
    let outliers = geom.outliers_a();
    if geom.k as f64 <= geom.base_rate * geom.n_a as f64 {
        failures.push(format!(
            "neighbor count k={} must exceed the per-group outlier count {outliers}",
            geom.k
        ));
    }
    if geom.intra_b < geom.intra_a {
        failures.push(format!(
            "group b must be at least as sparse as group a; got intra {} vs {}",
            geom.intra_b, geom.intra_a
        ));
    }
    if !failures.is_empty() {
        return Ok(TheoryPrediction::premise_failure(failures));
    }
    let e_a = expected_lof_clustered(outliers as f64, geom.k, geom.gap_a, geom.intra_a)?;
    let e_b = expected_lof_clustered(geom.outliers_b() as f64, geom.k, geom.gap_b, geom.intra_b)?;
    let verdict = if approx_eq(geom.intra_a, geom.intra_b) {
        Verdict::Equal
    } else {
        Verdict::GroupAHigher
    };
    let mut notes = Vec::new();
    if geom.gap_b <= 1.1 * geom.intra_b {
        notes.push(
            "masking regime: group-b outliers score close to 1 and blend with inliers (low TPR)"
                .to_string(),
        );
    }
    Ok(TheoryPrediction {
        premises_hold: true,
        premise_failures: Vec::new(),
        values: vec![
            ("expected_lof_outliers_a".into(), e_a),
            ("expected_lof_outliers_b".into(), e_b),
        ],
        verdict: Some(verdict),
        notes,
    })
}

/// Split likelihoods under density variation: a split lands among the sparser
/// group's outliers more often, while the collective inlier-outlier split is
/// equally likely for both groups.
pub fn check_prop2(geom: &IdealGeometry) -> Result<TheoryPrediction> {
    let mut failures = Vec::new();
    if !approx_eq(geom.gap_a, geom.gap_b) {
        failures.push(format!(
            "inlier-outlier gaps must match; got {} vs {}",
            geom.gap_a, geom.gap_b
        ));
    }
    if geom.intra_b < geom.intra_a {
        failures.push(format!(
            "group b must be at least as sparse as group a; got intra {} vs {}",
            geom.intra_b, geom.intra_a
        ));
    }
    if !failures.is_empty() {
        return Ok(TheoryPrediction::premise_failure(failures));
    }
    let range = geom.split_range.unwrap_or(geom.gap_a + geom.intra_a.max(geom.intra_b));
    let p_a = split_probability(geom.intra_a, range, 1)?;
    let p_b = split_probability(geom.intra_b, range, 1)?;
    let p_gap = split_probability(geom.gap_a, range, 1)?;
    let ratio_hdim = (geom.intra_b / geom.intra_a).powi(geom.dims as i32);
    let verdict = if approx_eq(geom.intra_a, geom.intra_b) {
        Verdict::Equal
    } else {
        Verdict::GroupBHigher
    };
    Ok(TheoryPrediction {
        premises_hold: true,
        premise_failures: Vec::new(),
        values: vec![
            ("p_split_among_outliers_a".into(), p_a),
            ("p_split_among_outliers_b".into(), p_b),
            ("p_split_inlier_outlier".into(), p_gap),
            ("outlier_split_ratio_hdim".into(), ratio_hdim),
        ],
        verdict: Some(verdict),
        notes: vec![
            "the inlier-outlier split is equally likely for both groups, so the collective \
             isolating split retains recall for group a"
                .to_string(),
        ],
    })
}

/// Within-group multi-modality: micro-cluster members earn higher factors than
/// group a's full-size outlier cluster, and small inlier micro-clusters can
/// outrank outlier ones.
pub fn check_prop3(geom: &IdealGeometry) -> Result<TheoryPrediction> {
    let mut failures = Vec::new();
    if geom.n_a != geom.n_b {
        failures.push(format!("groups must have equal size; got {} vs {}", geom.n_a, geom.n_b));
    }
    if !approx_eq(geom.intra_a, geom.intra_b) {
        failures.push(format!(
            "subpopulations must keep group a's intra distance; got {} vs {}",
            geom.intra_a, geom.intra_b
        ));
    }
    if !approx_eq(geom.gap_a, geom.gap_b) {
        failures.push(format!("gaps must match; got {} vs {}", geom.gap_a, geom.gap_b));
    }
    if geom.gap_a <= geom.intra_a {
        failures.push("the gap must exceed the intra distance".to_string());
    }
    if geom.k as f64 <= geom.base_rate * geom.n_a as f64 {
        failures.push(format!(
            "neighbor count k={} must exceed the per-group outlier count",
            geom.k
        ));
    }
    if geom.b_inlier_subpops == 0 || geom.b_outlier_subpops == 0 {
        failures.push("subpopulation counts must be positive".to_string());
    }
    if !failures.is_empty() {
        return Ok(TheoryPrediction::premise_failure(failures));
    }
    let out_sub = geom.outliers_b() as f64 / geom.b_outlier_subpops as f64;
    let in_sub =
        (geom.n_b - geom.outliers_b()) as f64 / geom.b_inlier_subpops as f64;
    let e_out_b = expected_lof_clustered(out_sub, geom.k, geom.gap_b, geom.intra_b)?;
    let e_in_b = expected_lof_clustered(in_sub, geom.k, geom.gap_b, geom.intra_b)?;
    let e_out_a =
        expected_lof_clustered(geom.outliers_a() as f64, geom.k, geom.gap_a, geom.intra_a)?;
    let verdict = if approx_eq(e_out_b, e_out_a) {
        Verdict::Equal
    } else if e_out_b > e_out_a {
        Verdict::GroupBHigher
    } else {
        Verdict::GroupAHigher
    };
    let mut notes = Vec::new();
    if in_sub < out_sub && out_sub < geom.k as f64 {
        notes.push(
            "inlier micro-clusters are smaller than outlier ones: inlier factors exceed \
             outlier factors within group b (high FPR, low TPR)"
                .to_string(),
        );
    }
    if geom.k as f64 <= out_sub.min(in_sub) {
        notes.push("neighbor count below every subpopulation size: complete masking".to_string());
    }
    Ok(TheoryPrediction {
        premises_hold: true,
        premise_failures: Vec::new(),
        values: vec![
            ("expected_lof_outlier_subpop_b".into(), e_out_b),
            ("expected_lof_inlier_subpop_b".into(), e_in_b),
            ("expected_lof_outliers_a".into(), e_out_a),
        ],
        verdict: Some(verdict),
        notes,
    })
}

/// Subspace view of multi-modality: proxy-axis splits separate group-b
/// subpopulations more easily than group-a outliers, while culprit-axis
/// splits are equally likely for both groups, retaining recall.
pub fn check_prop4(geom: &IdealGeometry) -> Result<TheoryPrediction> {
    let mut failures = Vec::new();
    let Some(proxy_gap) = geom.proxy_gap else {
        return Ok(TheoryPrediction::premise_failure(vec![
            "proxy_gap is required for the subspace analysis".to_string(),
        ]));
    };
    if proxy_gap <= geom.intra_a {
        failures.push(format!(
            "subpopulation separation {proxy_gap} must exceed the intra distance {}",
            geom.intra_a
        ));
    }
    if !approx_eq(geom.intra_a, geom.intra_b) {
        failures.push("subpopulations must keep group a's intra distance".to_string());
    }
    if !approx_eq(geom.gap_a, geom.gap_b) {
        failures.push("culprit-axis gaps must match".to_string());
    }
    if geom.b_inlier_subpops < 2 && geom.b_outlier_subpops < 2 {
        failures.push("group b must be fragmented into at least two subpopulations".to_string());
    }
    if !failures.is_empty() {
        return Ok(TheoryPrediction::premise_failure(failures));
    }
    let proxy_range = geom.split_range.unwrap_or(proxy_gap + geom.intra_a);
    let culprit_range = geom.gap_a + geom.intra_a.max(geom.intra_b);
    let p_proxy_b = split_probability(proxy_gap, proxy_range, 1)?;
    let p_proxy_a = split_probability(geom.intra_a, proxy_range, 1)?;
    let p_culprit = split_probability(geom.gap_a, culprit_range, 1)?;
    Ok(TheoryPrediction {
        premises_hold: true,
        premise_failures: Vec::new(),
        values: vec![
            ("p_proxy_split_between_b_subpops".into(), p_proxy_b),
            ("p_proxy_split_among_a_outliers".into(), p_proxy_a),
            ("p_culprit_split_inlier_outlier".into(), p_culprit),
        ],
        verdict: Some(Verdict::GroupBHigher),
        notes: vec![
            "culprit-axis splits are equally likely for both groups, so recall is retained \
             even as proxy-axis splits inflate group b's flag rate"
                .to_string(),
        ],
    })
}

/// Scattered outliers under density variation: equal-size local neighborhoods
/// earn higher factors in the denser group; dissolved neighborhoods with a few
/// inlier neighbors stay above a factor of 1.
pub fn check_prop5(geom: &IdealGeometry) -> Result<TheoryPrediction> {
    let mut failures = Vec::new();
    let Some(m) = geom.neighborhood_size else {
        return Ok(TheoryPrediction::premise_failure(vec![
            "neighborhood_size is required for the scattered analysis".to_string(),
        ]));
    };
    if geom.k <= m {
        failures.push(format!(
            "neighbor count k={} must exceed the largest neighborhood {m}",
            geom.k
        ));
    }
    if !approx_eq(geom.gap_a, geom.gap_b) {
        failures.push("gaps must match".to_string());
    }
    if geom.intra_a >= geom.intra_b {
        failures.push("group b inliers must be sparser (intra_a < intra_b)".to_string());
    }
    let out_a = geom.outlier_intra_a.unwrap_or(geom.intra_a);
    let out_b = geom.outlier_intra_b.unwrap_or(geom.intra_b);
    if out_a >= out_b {
        failures.push("group b neighborhoods must be sparser (outlier_intra_a < outlier_intra_b)".into());
    }
    if out_a <= geom.intra_a || out_b <= geom.intra_b {
        failures.push("scattered neighborhoods must be sparser than their inliers".to_string());
    }
    if geom.gap_b < out_b {
        failures.push("the gap must dominate the neighborhood intra distance".to_string());
    }
    if !failures.is_empty() {
        return Ok(TheoryPrediction::premise_failure(failures));
    }
    let e_a = expected_lof_clustered(m as f64, geom.k, geom.gap_a, geom.intra_a)?;
    let e_b = expected_lof_clustered(m as f64, geom.k, geom.gap_b, geom.intra_b)?;
    let mut values = vec![
        ("expected_lof_neighborhood_a".into(), e_a),
        ("expected_lof_neighborhood_b".into(), e_b),
    ];
    let mut notes = Vec::new();
    if let Some(alpha) = geom.inlier_neighbors {
        // Dissolved-neighborhood correction: alpha inlier neighbors keep the
        // factor above 1 as long as the inliers are denser than the gap.
        let k = geom.k as f64;
        let corrected =
            ((k - alpha as f64) / geom.gap_a + alpha as f64 / geom.intra_b) / (k / geom.gap_a);
        values.push(("expected_lof_dissolved_b".into(), corrected));
        notes.push(
            "with dissolved neighborhoods, adjacent inliers keep group-b outlier factors \
             above 1, avoiding the full masking of the clustered setting"
                .to_string(),
        );
    }
    Ok(TheoryPrediction {
        premises_hold: true,
        premise_failures: Vec::new(),
        values,
        verdict: Some(Verdict::GroupAHigher),
        notes,
    })
}

/// Mean pairwise distance of an isotropic Gaussian blob, per unit std.
///
/// `E||x - y|| = 2 Gamma((h+1)/2) / Gamma(h/2)` for iid N(0, I_h); computed by
/// the Gamma-ratio recurrence.
pub fn gaussian_pair_distance_factor(dims: usize) -> f64 {
    let mut ratio = 1.0 / std::f64::consts::PI.sqrt(); // Gamma(1)/Gamma(1/2)
    for h in 1..dims {
        ratio = (h as f64 / 2.0) / ratio;
    }
    2.0 * ratio
}

struct Blob {
    offsets: Vec<(usize, f64)>,
    std: f64,
    count: usize,
    group: GroupLabel,
    outlier: bool,
}

fn spread_counts(total: usize, parts: usize) -> Vec<usize> {
    let base = total / parts;
    let extra = total % parts;
    (0..parts).map(|i| base + usize::from(i < extra)).collect()
}

/// Realizes a geometry as Gaussian blobs on mutually orthogonal axes.
///
/// Blob centers honor the requested gaps exactly; intra distances are
/// realized by per-blob stds proportional to the requested intra distances,
/// with the tightest blob at `spread` per dimension (so the realized mean
/// pairwise distance is `spread` times the dimension factor). Groups sit far
/// apart on the leading proxy axis so neighborhoods never cross groups.
pub fn realize_geometry(geom: &IdealGeometry, spread: f64, seed: u64) -> Result<Dataset> {
    if !(spread > 0.0) {
        return Err(Error::Geometry("spread must be positive".into()));
    }
    if geom.n_a == 0 && geom.n_b == 0 {
        return Err(Error::Geometry("at least one group must be populated".into()));
    }
    for (name, v) in [("intra_a", geom.intra_a), ("intra_b", geom.intra_b)] {
        if !(v > 0.0) {
            return Err(Error::Geometry(format!("{name} must be positive; got {v}")));
        }
    }
    let out_a = geom.outliers_a();
    let out_b = geom.outliers_b();
    if out_a > 0 && geom.gap_a < geom.intra_a {
        return Err(Error::Geometry(format!(
            "gap_a={} is smaller than intra_a={}: clusters would overlap",
            geom.gap_a, geom.intra_a
        )));
    }
    if out_b > 0 && geom.gap_b < geom.intra_b {
        return Err(Error::Geometry(format!(
            "gap_b={} is smaller than intra_b={}: clusters would overlap",
            geom.gap_b, geom.intra_b
        )));
    }
    if out_a > 0 && geom.a_outlier_subpops > out_a {
        return Err(Error::Geometry("more group-a subpopulations than outliers".into()));
    }
    if out_b > 0 && geom.b_outlier_subpops > out_b {
        return Err(Error::Geometry("more group-b subpopulations than outliers".into()));
    }

    // Axis layout: 0 separates the groups; 1 is the shared culprit axis; the
    // rest hold subpopulation offsets.
    let mut axis_roles = vec![FeatureRole::Proxy, FeatureRole::Incriminating];
    let alloc_axis = |role: FeatureRole, roles: &mut Vec<FeatureRole>| -> usize {
        roles.push(role);
        roles.len() - 1
    };

    let out_intra_a = geom.outlier_intra_a.unwrap_or(geom.intra_a);
    let out_intra_b = geom.outlier_intra_b.unwrap_or(geom.intra_b);
    let distances = [
        geom.intra_a,
        geom.intra_b,
        geom.gap_a,
        geom.gap_b,
        out_intra_a,
        out_intra_b,
        geom.proxy_gap.unwrap_or(0.0),
    ];
    let max_dist = distances.iter().cloned().fold(0.0, f64::max);
    let group_sep = 50.0 * max_dist.max(1.0);

    let mut blobs: Vec<Blob> = Vec::new();
    // Group a: one inlier blob, outlier subpopulations on distinct axes when
    // fragmented (scattered neighborhoods), on the culprit axis otherwise.
    if geom.n_a > 0 {
        blobs.push(Blob {
            offsets: vec![],
            std: geom.intra_a,
            count: geom.n_a - out_a,
            group: GroupLabel::A,
            outlier: false,
        });
        if out_a > 0 {
            let counts = spread_counts(out_a, geom.a_outlier_subpops);
            for (s, &count) in counts.iter().enumerate() {
                let offsets = if geom.a_outlier_subpops == 1 {
                    vec![(1usize, geom.gap_a)]
                } else {
                    let axis = if s == 0 { 1 } else { alloc_axis(FeatureRole::Occlusion, &mut axis_roles) };
                    vec![(axis, geom.gap_a)]
                };
                blobs.push(Blob {
                    offsets,
                    std: out_intra_a,
                    count,
                    group: GroupLabel::A,
                    outlier: true,
                });
            }
        }
    }
    // Group b.
    if geom.n_b > 0 {
        let in_b = geom.n_b - out_b;
        match geom.proxy_gap {
            // Subspace layout: subpopulations separated along distinct proxy
            // axes, outliers offset along the shared culprit axis.
            Some(proxy_gap) => {
                let in_counts = spread_counts(in_b, geom.b_inlier_subpops);
                let scale = proxy_gap / std::f64::consts::SQRT_2;
                for &count in &in_counts {
                    let axis = alloc_axis(FeatureRole::Proxy, &mut axis_roles);
                    blobs.push(Blob {
                        offsets: vec![(0, group_sep), (axis, scale)],
                        std: geom.intra_b,
                        count,
                        group: GroupLabel::B,
                        outlier: false,
                    });
                }
                if out_b > 0 {
                    let out_counts = spread_counts(out_b, geom.b_outlier_subpops);
                    for &count in &out_counts {
                        let axis = alloc_axis(FeatureRole::Proxy, &mut axis_roles);
                        blobs.push(Blob {
                            offsets: vec![(0, group_sep), (axis, scale), (1, geom.gap_b)],
                            std: out_intra_b,
                            count,
                            group: GroupLabel::B,
                            outlier: true,
                        });
                    }
                }
            }
            None if geom.b_inlier_subpops == 1 && geom.b_outlier_subpops == 1 => {
                blobs.push(Blob {
                    offsets: vec![(0, group_sep)],
                    std: geom.intra_b,
                    count: in_b,
                    group: GroupLabel::B,
                    outlier: false,
                });
                if out_b > 0 {
                    blobs.push(Blob {
                        offsets: vec![(0, group_sep), (1, geom.gap_b)],
                        std: out_intra_b,
                        count: out_b,
                        group: GroupLabel::B,
                        outlier: true,
                    });
                }
            }
            // Uniform multi-modal layout: every subpopulation (inlier and
            // outlier) sits at pairwise distance gap_b on simplex axes.
            None => {
                let scale = geom.gap_b / std::f64::consts::SQRT_2;
                let in_counts = spread_counts(in_b, geom.b_inlier_subpops);
                let out_counts = spread_counts(out_b, geom.b_outlier_subpops);
                for (i, &count) in in_counts.iter().chain(out_counts.iter()).enumerate() {
                    let axis = alloc_axis(FeatureRole::Occlusion, &mut axis_roles);
                    let outlier = i >= in_counts.len();
                    blobs.push(Blob {
                        offsets: vec![(0, group_sep), (axis, scale)],
                        std: if outlier { out_intra_b } else { geom.intra_b },
                        count,
                        group: GroupLabel::B,
                        outlier,
                    });
                }
            }
        }
    }

    let layout_axes = axis_roles.len();
    if geom.dims < layout_axes + 1 {
        return Err(Error::Geometry(format!(
            "dims={} too small: the layout alone needs {layout_axes} axes",
            geom.dims
        )));
    }

    // Per-blob std: the tightest requested intra distance maps to `spread`.
    let min_intra = blobs
        .iter()
        .filter(|b| b.count > 1)
        .map(|b| b.std)
        .fold(f64::INFINITY, f64::min);
    let min_intra = if min_intra.is_finite() { min_intra } else { 1.0 };

    let mut roles = axis_roles;
    roles.resize(geom.dims, FeatureRole::Occlusion);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_total: usize = blobs.iter().map(|b| b.count).sum();
    let mut features = Vec::with_capacity(n_total * geom.dims);
    let mut group = Vec::with_capacity(n_total);
    let mut y = Vec::with_capacity(n_total);
    for blob in &blobs {
        let std = spread * blob.std / min_intra;
        let noise = Normal::new(0.0, std).expect("std > 0");
        for _ in 0..blob.count {
            let start = features.len();
            for _ in 0..geom.dims {
                features.push(noise.sample(&mut rng));
            }
            for &(axis, offset) in &blob.offsets {
                features[start + axis] += offset;
            }
            group.push(blob.group);
            y.push(blob.outlier);
        }
    }
    let meta = DatasetMeta {
        seed,
        scenario: format!(
            "geometry(dims={}, spread={spread}, blobs={})",
            geom.dims,
            blobs.len()
        ),
        sim: None,
        scatter: None,
    };
    Dataset::new(features, geom.dims, group.clone(), group, y, roles, meta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_geom() -> IdealGeometry {
        IdealGeometry {
            n_a: 100,
            n_b: 100,
            base_rate: 0.1,
            intra_a: 1.0,
            intra_b: 3.0,
            gap_a: 10.0,
            gap_b: 10.0,
            proxy_gap: None,
            outlier_intra_a: None,
            outlier_intra_b: None,
            a_outlier_subpops: 1,
            b_inlier_subpops: 1,
            b_outlier_subpops: 1,
            neighborhood_size: None,
            inlier_neighbors: None,
            k: 50,
            dims: 16,
            split_range: None,
        }
    }

    #[test]
    fn closed_form_matches_hand_arithmetic() {
        // Masking branch.
        assert_eq!(expected_lof_clustered(2.0, 1, 10.0, 1.0).unwrap(), 1.0);
        // Plug-in: (2/10 + 2/1) / (4/10) = 5.5.
        let e = expected_lof_clustered(2.0, 4, 10.0, 1.0).unwrap();
        assert!((e - 5.5).abs() < 1e-12);
        // Gap equal to intra distance degenerates to 1.
        let e = expected_lof_clustered(2.0, 4, 1.0, 1.0).unwrap();
        assert!((e - 1.0).abs() < 1e-12);
        assert!(expected_lof_clustered(2.0, 4, 0.5, 1.0).is_err());
    }

    #[test]
    fn split_probability_forms() {
        assert_eq!(split_probability(20.0, 20.0, 1).unwrap(), 1.0);
        assert!((split_probability(2.0, 20.0, 1).unwrap() - 0.1).abs() < 1e-12);
        assert!((split_probability(2.0, 20.0, 2).unwrap() - 0.01).abs() < 1e-12);
        assert!(split_probability(21.0, 20.0, 1).is_err());
    }

    #[test]
    fn prop1_orders_groups_and_flags_masking() {
        let mut geom = base_geom();
        geom.k = 150;
        geom.n_a = 1000;
        geom.n_b = 1000;
        let p = check_prop1(&geom).unwrap();
        assert!(p.premises_hold);
        assert_eq!(p.verdict, Some(Verdict::GroupAHigher));
        // d=1, D=3, gap=10, k=150, |O|=100: E_a = 4.0, E_b = (10 + 50/3)/15.
        let e_a = p.values.iter().find(|(n, _)| n == "expected_lof_outliers_a").unwrap().1;
        let e_b = p.values.iter().find(|(n, _)| n == "expected_lof_outliers_b").unwrap().1;
        assert!((e_a - 4.0).abs() < 1e-12);
        assert!((e_b - (100.0 / 10.0 + 50.0 / 3.0) / 15.0).abs() < 1e-12);

        let mut masked = geom.clone();
        masked.gap_a = 3.0;
        masked.gap_b = 3.0;
        let p = check_prop1(&masked).unwrap();
        assert!(p.notes.iter().any(|n| n.contains("masking")));

        let mut equal = geom;
        equal.intra_b = equal.intra_a;
        assert_eq!(check_prop1(&equal).unwrap().verdict, Some(Verdict::Equal));
    }

    #[test]
    fn prop1_premise_violation_yields_no_verdict() {
        let mut geom = base_geom();
        geom.k = 5; // below the outlier count of 10
        let p = check_prop1(&geom).unwrap();
        assert!(!p.premises_hold);
        assert!(p.verdict.is_none());
    }

    #[test]
    fn prop2_split_probabilities() {
        let mut geom = base_geom();
        geom.split_range = Some(30.0);
        let p = check_prop2(&geom).unwrap();
        assert!(p.premises_hold);
        assert_eq!(p.verdict, Some(Verdict::GroupBHigher));
        let pa = p.values.iter().find(|(n, _)| n == "p_split_among_outliers_a").unwrap().1;
        let pb = p.values.iter().find(|(n, _)| n == "p_split_among_outliers_b").unwrap().1;
        assert!((pa - 1.0 / 30.0).abs() < 1e-12);
        assert!((pb - 0.1).abs() < 1e-12);
        let mut equal = base_geom();
        equal.intra_b = equal.intra_a;
        assert_eq!(check_prop2(&equal).unwrap().verdict, Some(Verdict::Equal));
    }

    #[test]
    fn prop3_micro_clusters_and_inversion() {
        let mut geom = base_geom();
        geom.n_a = 1000;
        geom.n_b = 1000;
        geom.intra_b = 1.0;
        geom.k = 150;
        geom.b_outlier_subpops = 4; // outlier subpops of 25
        geom.b_inlier_subpops = 90; // inlier subpops of 10
        let p = check_prop3(&geom).unwrap();
        assert!(p.premises_hold, "{:?}", p.premise_failures);
        assert_eq!(p.verdict, Some(Verdict::GroupBHigher));
        let e_in = p.values.iter().find(|(n, _)| n == "expected_lof_inlier_subpop_b").unwrap().1;
        let e_out = p.values.iter().find(|(n, _)| n == "expected_lof_outlier_subpop_b").unwrap().1;
        assert!(e_in > e_out, "small inlier subpops must outrank outlier subpops");
        assert!(p.notes.iter().any(|n| n.contains("FPR")));

        // Degenerate fragmentation reduces to the equal-density comparison.
        let mut flat = base_geom();
        flat.intra_b = flat.intra_a;
        flat.n_a = 1000;
        flat.n_b = 1000;
        flat.k = 150;
        let p = check_prop3(&flat).unwrap();
        assert_eq!(p.verdict, Some(Verdict::Equal));
    }

    #[test]
    fn prop5_scattered_neighborhoods() {
        let mut geom = base_geom();
        geom.neighborhood_size = Some(10);
        geom.inlier_neighbors = Some(10);
        geom.outlier_intra_a = Some(2.0);
        geom.outlier_intra_b = Some(4.0);
        geom.intra_a = 1.0;
        geom.intra_b = 2.0;
        geom.k = 50;
        let p = check_prop5(&geom).unwrap();
        assert!(p.premises_hold, "{:?}", p.premise_failures);
        assert_eq!(p.verdict, Some(Verdict::GroupAHigher));
        // Dissolved correction with k=50, alpha=10, gap=10, D_in=2:
        // (40/10 + 10/2) / (50/10) = 1.8.
        let corrected =
            p.values.iter().find(|(n, _)| n == "expected_lof_dissolved_b").unwrap().1;
        assert!((corrected - 1.8).abs() < 1e-12);
    }

    #[test]
    fn realize_rejects_overlapping_clusters() {
        let mut geom = base_geom();
        geom.intra_a = 1.0;
        geom.intra_b = 1.0;
        geom.gap_a = 0.4;
        geom.gap_b = 0.4;
        assert!(matches!(realize_geometry(&geom, 0.05, 0), Err(Error::Geometry(_))));
    }

    #[test]
    fn realize_single_cluster_any_spread() {
        let geom = IdealGeometry {
            n_a: 40,
            n_b: 0,
            base_rate: 0.0,
            intra_a: 1.0,
            intra_b: 1.0,
            gap_a: 10.0,
            gap_b: 10.0,
            proxy_gap: None,
            outlier_intra_a: None,
            outlier_intra_b: None,
            a_outlier_subpops: 1,
            b_inlier_subpops: 1,
            b_outlier_subpops: 1,
            neighborhood_size: None,
            inlier_neighbors: None,
            k: 5,
            dims: 8,
            split_range: None,
        };
        let ds = realize_geometry(&geom, 0.3, 1).unwrap();
        assert_eq!(ds.n_rows(), 40);
        assert_eq!(ds.outlier_count(), 0);
    }

    #[test]
    fn realized_centers_honor_the_gap() {
        let mut geom = base_geom();
        geom.n_a = 200;
        geom.n_b = 0;
        geom.k = 10;
        geom.dims = 24;
        let ds = realize_geometry(&geom, 0.01, 3).unwrap();
        // Mean distance between inliers and outliers approximates the gap.
        let inliers: Vec<usize> = (0..ds.n_rows()).filter(|&i| !ds.y[i]).collect();
        let outliers: Vec<usize> = (0..ds.n_rows()).filter(|&i| ds.y[i]).collect();
        assert!(!outliers.is_empty());
        let mut total = 0.0;
        let mut pairs = 0usize;
        for &i in &inliers {
            for &j in &outliers {
                total += crate::knn::euclidean(ds.row(i), ds.row(j));
                pairs += 1;
            }
        }
        let mean = total / pairs as f64;
        assert!((mean - 10.0).abs() < 0.2, "inter-cluster mean {mean}");
    }

    #[test]
    fn pair_distance_factor_matches_known_values() {
        // h=1: 2/sqrt(pi); h=2: sqrt(pi).
        assert!((gaussian_pair_distance_factor(1) - 2.0 / std::f64::consts::PI.sqrt()).abs() < 1e-12);
        assert!((gaussian_pair_distance_factor(2) - std::f64::consts::PI.sqrt()).abs() < 1e-12);
        // Large h approaches sqrt(2h - 1).
        let f64_ = gaussian_pair_distance_factor(64);
        assert!((f64_ - (127.0f64).sqrt()).abs() < 0.01, "factor {f64_}");
    }
}
