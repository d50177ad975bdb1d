//! Entropy of the correlated triple `(X, Y, Z)` and its chain-rule
//! decomposition.
//!
//! For sets `A`, `B` and alphabet sizes `(r, s)`, `Z` is uniform over strings
//! whose `i`-th symbol lies in an alphabet of size `r` when `X_i = Y_i` and
//! `s` otherwise, with `X in A`, `Y in B`. `Z` is never materialized: the pair
//! `(x, y)` carries the exact multiplicity `r^{a(x,y)} s^{d(x,y)}`, every
//! entropy is computed from those counts, and conditioning on `Z_{<i}` is
//! conditioning on the prefix pair `(x_{<i}, y_{<i})` because the law of the
//! remaining symbols depends on nothing else.
//!
//! Coordinate `i` is 1-based and is bit `i - 1` of a point, so the prefix
//! `W_{<i}` is `w & ((1 << (i-1)) - 1)`.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::Zero;

use crate::bigcount::{entropy_of_counts, log2_big, ratio};
use crate::cube::CubeFunction;
use crate::error::{Error, Result};
use crate::fdelta::{eval_f, BitJoint};
use crate::noise::NoiseParam;
use crate::report::{CheckReport, ReportParams, Scale, Tolerances};

/// Largest dimension for which `|A| |B|` pairs are enumerated.
pub const MAX_TRIPLE_DIM: usize = 10;

/// A finite law with nonnegative probabilities summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if let Some(i) = probs.iter().position(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidDistribution(format!(
                "probability {} at index {i}",
                probs[i]
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDistribution(format!("probabilities sum to {total}")));
        }
        Ok(Self { probs })
    }

    /// Law proportional to exact counts.
    pub fn from_counts(counts: &[BigUint]) -> Result<Self> {
        let total: BigUint = counts.iter().sum();
        if total.is_zero() {
            return Err(Error::InvalidDistribution("all counts are zero".into()));
        }
        Ok(Self {
            probs: counts.iter().map(|c| ratio(c, &total)).collect(),
        })
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidDistribution("no outcomes".into()));
        }
        Ok(Self {
            probs: vec![1.0 / k as f64; k],
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn entropy(&self) -> f64 {
        plog_sum(&self.probs)
    }
}

fn plog_sum(probs: &[f64]) -> f64 {
    probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum()
}

/// `H = -sum p log2 p` with `0 log 0 = 0`.
pub fn entropy(probs: &[f64]) -> Result<f64> {
    if let Some(i) = probs.iter().position(|&p| !(p >= 0.0)) {
        return Err(Error::InvalidDistribution(format!(
            "negative probability {} at index {i}",
            probs[i]
        )));
    }
    Ok(plog_sum(probs))
}

/// Exact multiplicities of the pairs `(x, y)` with positive weight.
#[derive(Debug, Clone)]
struct PairMass {
    n: usize,
    param: NoiseParam,
    pairs: Vec<(usize, usize, BigUint)>,
    total: BigUint,
}

/// 2x2 counts of `(X_i, Y_i)` indexed by `2 x_i + y_i`.
type Cells = [BigUint; 4];

fn empty_cells() -> Cells {
    [BigUint::zero(), BigUint::zero(), BigUint::zero(), BigUint::zero()]
}

impl PairMass {
    fn build(n: usize, param: NoiseParam, xs: &[(usize, u64)], ys: &[(usize, u64)]) -> Result<Self> {
        let pow_r: Vec<BigUint> = (0..=n as u32).map(|k| BigUint::from(param.r()).pow(k)).collect();
        let pow_s: Vec<BigUint> = (0..=n as u32).map(|k| BigUint::from(param.s()).pow(k)).collect();
        let mut pairs = Vec::with_capacity(xs.len() * ys.len());
        let mut total = BigUint::zero();
        for &(x, fx) in xs {
            for &(y, gy) in ys {
                let d = (x ^ y).count_ones() as usize;
                let mut w = &pow_r[n - d] * &pow_s[d];
                if w.is_zero() {
                    continue;
                }
                if fx != 1 || gy != 1 {
                    w *= BigUint::from(fx) * BigUint::from(gy);
                }
                total += &w;
                pairs.push((x, y, w));
            }
        }
        if total.is_zero() {
            return Err(Error::EmptyTripleSupport);
        }
        Ok(Self { n, param, pairs, total })
    }

    fn p(&self, w: &BigUint) -> f64 {
        ratio(w, &self.total)
    }

    fn entropy_xy(&self) -> f64 {
        entropy_of_counts(self.pairs.iter().map(|(_, _, w)| w), &self.total)
    }

    fn marginal(&self, first: bool) -> Vec<BigUint> {
        let mut m = vec![BigUint::zero(); 1 << self.n];
        for (x, y, w) in &self.pairs {
            m[if first { *x } else { *y }] += w;
        }
        m
    }

    fn entropy_x(&self) -> f64 {
        entropy_of_counts(&self.marginal(true), &self.total)
    }

    fn entropy_y(&self) -> f64 {
        entropy_of_counts(&self.marginal(false), &self.total)
    }

    /// `H(Z | X, Y) = E[a] log r + E[d] log s`, with the `s` term absent when
    /// disagreement has no mass.
    fn conditional_z_entropy(&self) -> f64 {
        let (mut agree, mut disagree) = (0.0, 0.0);
        for (x, y, w) in &self.pairs {
            let d = (x ^ y).count_ones() as f64;
            let p = self.p(w);
            agree += p * (self.n as f64 - d);
            disagree += p * d;
        }
        let mut h = agree * (self.param.r() as f64).log2();
        if disagree > 0.0 {
            h += disagree * (self.param.s() as f64).log2();
        }
        h
    }

    /// `H(Z)` through `H(X, Y) + H(Z | X, Y)`.
    fn entropy_z_by_parts(&self) -> f64 {
        self.entropy_xy() + self.conditional_z_entropy()
    }

    fn joints_by_past(&self, i: usize) -> BTreeMap<(usize, usize), Cells> {
        let mask = (1usize << (i - 1)) - 1;
        let bit = i - 1;
        let mut out: BTreeMap<(usize, usize), Cells> = BTreeMap::new();
        for (x, y, w) in &self.pairs {
            let cell = 2 * ((x >> bit) & 1) + ((y >> bit) & 1);
            out.entry((x & mask, y & mask)).or_insert_with(empty_cells)[cell] += w;
        }
        out
    }

    fn marginal_by_prefix(&self, i: usize, first: bool) -> BTreeMap<usize, [BigUint; 2]> {
        let mask = (1usize << (i - 1)) - 1;
        let bit = i - 1;
        let mut out: BTreeMap<usize, [BigUint; 2]> = BTreeMap::new();
        for (x, y, w) in &self.pairs {
            let v = if first { *x } else { *y };
            out.entry(v & mask)
                .or_insert_with(|| [BigUint::zero(), BigUint::zero()])[(v >> bit) & 1] += w;
        }
        out
    }

    fn check_coordinate(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.n {
            return Err(Error::CoordinateOutOfRange { i, n: self.n });
        }
        Ok(())
    }

    /// Per-coordinate conditional entropies `H(Z_i | Z_{<i})`,
    /// `H(X_i | X_{<i})`, `H(Y_i | Y_{<i})`, `H(X_i | Z_{<i})`, `H(Y_i | Z_{<i})`.
    fn step_entropies(&self, i: usize) -> StepEntropies {
        let mut step = StepEntropies::default();
        for cells in self.joints_by_past(i).values() {
            let weight: BigUint = cells.iter().sum();
            let p_past = self.p(&weight);
            let local = LocalStep::from_cells(cells, &weight, self.param);
            step.z_given_z += p_past * local.h_z;
            step.x_given_z += p_past * local.h_x;
            step.y_given_z += p_past * local.h_y;
        }
        for (first, slot) in [(true, &mut step.x_given_x), (false, &mut step.y_given_y)] {
            for halves in self.marginal_by_prefix(i, first).values() {
                let weight = &halves[0] + &halves[1];
                *slot += self.p(&weight) * entropy_of_counts(halves.iter(), &weight);
            }
        }
        step
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct StepEntropies {
    z_given_z: f64,
    x_given_x: f64,
    y_given_y: f64,
    x_given_z: f64,
    y_given_z: f64,
}

/// Quantities of one coordinate conditioned on one past.
#[derive(Debug, Clone, Copy)]
struct LocalStep {
    joint: BitJoint,
    h_xy: f64,
    h_x: f64,
    h_y: f64,
    h_z: f64,
}

impl LocalStep {
    fn from_cells(cells: &Cells, weight: &BigUint, param: NoiseParam) -> Self {
        let [c00, c01, c10, c11] = cells;
        let p = |c: &BigUint| ratio(c, weight);
        let joint = BitJoint::from_cells(p(c00), p(c01), p(c10), p(c11));
        let h_xy = entropy_of_counts(cells.iter(), weight);
        let h_x = entropy_of_counts([&(c00 + c01), &(c10 + c11)], weight);
        let h_y = entropy_of_counts([&(c00 + c10), &(c01 + c11)], weight);
        let agree = p(&(c00 + c11));
        let disagree = p(&(c01 + c10));
        let mut h_z = h_xy + agree * (param.r() as f64).log2();
        if disagree > 0.0 {
            h_z += disagree * (param.s() as f64).log2();
        }
        Self { joint, h_xy, h_x, h_y, h_z }
    }
}

/// `(r+s)/(2r)`.
fn entropy_scale(p: NoiseParam) -> f64 {
    (p.r() + p.s()) as f64 / (2 * p.r()) as f64
}

/// `log2(r+s) - s/r`.
fn step_constant(p: NoiseParam) -> f64 {
    ((p.r() + p.s()) as f64).log2() - p.delta()
}

/// The uniform law over valid triples for two nonempty sets.
#[derive(Debug, Clone)]
pub struct TripleModel {
    xset: CubeFunction,
    yset: CubeFunction,
    mass: PairMass,
}

impl TripleModel {
    pub fn new(xset: &CubeFunction, yset: &CubeFunction, param: NoiseParam) -> Result<Self> {
        xset.ensure_same_dim(yset)?;
        xset.ensure_indicator()?;
        yset.ensure_indicator()?;
        let n = xset.n();
        if n > MAX_TRIPLE_DIM {
            return Err(Error::DimensionTooLarge { n, max: MAX_TRIPLE_DIM });
        }
        let xs: Vec<(usize, u64)> = xset.support().into_iter().map(|x| (x, 1)).collect();
        let ys: Vec<(usize, u64)> = yset.support().into_iter().map(|y| (y, 1)).collect();
        if xs.is_empty() {
            return Err(Error::EmptySet("X set"));
        }
        if ys.is_empty() {
            return Err(Error::EmptySet("Y set"));
        }
        Ok(Self {
            xset: xset.clone(),
            yset: yset.clone(),
            mass: PairMass::build(n, param, &xs, &ys)?,
        })
    }

    pub fn n(&self) -> usize {
        self.mass.n
    }

    pub fn param(&self) -> NoiseParam {
        self.mass.param
    }

    pub fn xset(&self) -> &CubeFunction {
        &self.xset
    }

    pub fn yset(&self) -> &CubeFunction {
        &self.yset
    }

    /// `sum_{x in A, y in B} r^{a(x,y)} s^{d(x,y)}`: the number of valid `Z`.
    pub fn total_count(&self) -> &BigUint {
        &self.mass.total
    }

    /// Pairs with positive weight and their multiplicities.
    pub fn pair_weights(&self) -> impl Iterator<Item = (usize, usize, &BigUint)> {
        self.mass.pairs.iter().map(|(x, y, w)| (*x, *y, w))
    }

    /// Law of `(X, Y)` induced by uniform `Z`, over all `4^n` pairs (index
    /// `x * 2^n + y`).
    pub fn xy_distribution(&self) -> Distribution {
        let size = 1usize << self.n();
        let mut counts = vec![BigUint::zero(); size * size];
        for (x, y, w) in self.pair_weights() {
            counts[x * size + y] = w.clone();
        }
        Distribution::from_counts(&counts).expect("total is positive")
    }

    /// Law of `X` induced by uniform `Z`.
    pub fn x_distribution(&self) -> Distribution {
        Distribution::from_counts(&self.mass.marginal(true)).expect("total is positive")
    }

    /// Law of `Y` induced by uniform `Z`.
    pub fn y_distribution(&self) -> Distribution {
        Distribution::from_counts(&self.mass.marginal(false)).expect("total is positive")
    }

    fn params(&self) -> ReportParams {
        ReportParams::for_param(self.n(), self.param())
            .with_digest(self.xset.digest())
            .with_digest(self.yset.digest())
    }
}

/// `H(Z) = log2(total_count)`.
pub fn entropy_of_z(t: &TripleModel) -> f64 {
    log2_big(t.total_count())
}

/// Chain-rule terms per coordinate and the totals they must add up to.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDecomposition {
    /// `H(Z_i | Z_{<i})`.
    pub z_terms: Vec<f64>,
    /// `H(X_i | X_{<i})`.
    pub x_terms: Vec<f64>,
    /// `H(Y_i | Y_{<i})`.
    pub y_terms: Vec<f64>,
    pub h_z: f64,
    pub h_x: f64,
    pub h_y: f64,
}

pub fn chain_rule_decompose(t: &TripleModel) -> ChainDecomposition {
    let steps: Vec<StepEntropies> = (1..=t.n()).map(|i| t.mass.step_entropies(i)).collect();
    ChainDecomposition {
        z_terms: steps.iter().map(|s| s.z_given_z).collect(),
        x_terms: steps.iter().map(|s| s.x_given_x).collect(),
        y_terms: steps.iter().map(|s| s.y_given_y).collect(),
        h_z: entropy_of_z(t),
        h_x: t.mass.entropy_x(),
        h_y: t.mass.entropy_y(),
    }
}

/// Identity reports `sum_i H(W_i | W_{<i}) = H(W)` for `W = Z, X, Y`.
pub fn check_chain_rule(t: &TripleModel, tol: &Tolerances) -> Vec<CheckReport> {
    let c = chain_rule_decompose(t);
    [("chain_rule_z", &c.z_terms, c.h_z), ("chain_rule_x", &c.x_terms, c.h_x), ("chain_rule_y", &c.y_terms, c.h_y)]
        .into_iter()
        .map(|(name, terms, total)| {
            CheckReport::identity(name, t.params(), Scale::Log, terms.iter().sum(), total, tol)
        })
        .collect()
}

/// `H(Z)` two ways: `log2(total_count)` and `H(X, Y) + H(Z | X, Y)`.
pub fn check_entropy_of_z(t: &TripleModel, tol: &Tolerances) -> CheckReport {
    CheckReport::identity(
        "entropy_of_z",
        t.params(),
        Scale::Log,
        t.mass.entropy_z_by_parts(),
        entropy_of_z(t),
        tol,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginalBounds {
    pub h_x: f64,
    pub h_y: f64,
    pub log_x: f64,
    pub log_y: f64,
}

pub fn marginal_entropy_bounds(t: &TripleModel) -> MarginalBounds {
    MarginalBounds {
        h_x: t.mass.entropy_x(),
        h_y: t.mass.entropy_y(),
        log_x: (t.xset.support().len() as f64).log2(),
        log_y: (t.yset.support().len() as f64).log2(),
    }
}

/// `H(X) <= log2|A|` and `H(Y) <= log2|B|`.
pub fn check_marginal_bounds(t: &TripleModel, tol: &Tolerances) -> (CheckReport, CheckReport) {
    let b = marginal_entropy_bounds(t);
    (
        CheckReport::inequality("support_bound_x", t.params(), Scale::Log, b.h_x, b.log_x, tol),
        CheckReport::inequality("support_bound_y", t.params(), Scale::Log, b.h_y, b.log_y, tol),
    )
}

/// `H(X_i | Z_{<i}) <= H(X_i | X_{<i})` and the same for `Y`.
pub fn conditioning_reduction_check(t: &TripleModel, i: usize, tol: &Tolerances) -> Result<(CheckReport, CheckReport)> {
    t.mass.check_coordinate(i)?;
    let s = t.mass.step_entropies(i);
    let params = t.params().with_label("i", i);
    Ok((
        CheckReport::inequality("conditioning_x", params.clone(), Scale::Log, s.x_given_z, s.x_given_x, tol),
        CheckReport::inequality("conditioning_y", params, Scale::Log, s.y_given_z, s.y_given_y, tol),
    ))
}

/// `H(Z) <= ((r+s)/2r)(H(X) + H(Y)) + n(log2(r+s) - s/r)`.
pub fn check_global_entropy_inequality(t: &TripleModel, tol: &Tolerances) -> CheckReport {
    let p = t.param();
    let rhs = entropy_scale(p) * (t.mass.entropy_x() + t.mass.entropy_y()) + t.n() as f64 * step_constant(p);
    CheckReport::inequality("global_entropy", t.params(), Scale::Log, entropy_of_z(t), rhs, tol)
}

/// A fixed past `Z_{<i}`, represented by the prefix pair it determines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefixState {
    /// 1-based coordinate about to be revealed.
    pub i: usize,
    /// `x_{<i}` as the low `i - 1` bits.
    pub x_prefix: usize,
    pub y_prefix: usize,
    /// Number of `Z` strings consistent with the prefix pair.
    pub weight: BigUint,
}

/// Prefix pairs at coordinate `i` carrying positive weight, in increasing
/// `(x_prefix, y_prefix)` order.
pub fn achievable_pasts(t: &TripleModel, i: usize) -> Result<Vec<PrefixState>> {
    t.mass.check_coordinate(i)?;
    Ok(t.mass
        .joints_by_past(i)
        .into_iter()
        .map(|((x_prefix, y_prefix), cells)| PrefixState {
            i,
            x_prefix,
            y_prefix,
            weight: cells.iter().sum(),
        })
        .collect())
}

/// Law of `(X_i, Y_i)` given a past.
pub fn conditional_bit_joint(t: &TripleModel, past: &PrefixState) -> Result<BitJoint> {
    Ok(local_step(t, past)?.joint)
}

fn local_step(t: &TripleModel, past: &PrefixState) -> Result<LocalStep> {
    t.mass.check_coordinate(past.i)?;
    let mask = (1usize << (past.i - 1)) - 1;
    let bit = past.i - 1;
    let mut cells = empty_cells();
    for (x, y, w) in &t.mass.pairs {
        if x & mask == past.x_prefix && y & mask == past.y_prefix {
            cells[2 * ((x >> bit) & 1) + ((y >> bit) & 1)] += w;
        }
    }
    let weight: BigUint = cells.iter().sum();
    if weight.is_zero() {
        return Err(Error::UnachievablePast { i: past.i });
    }
    Ok(LocalStep::from_cells(&cells, &weight, t.param()))
}

fn claim_report(t: &TripleModel, i: usize, x_prefix: usize, y_prefix: usize, local: &LocalStep, tol: &Tolerances) -> CheckReport {
    let p = t.param();
    let rhs = entropy_scale(p) * (local.h_x + local.h_y) + step_constant(p);
    let params = t
        .params()
        .with_label("i", i)
        .with_label("x_prefix", x_prefix)
        .with_label("y_prefix", y_prefix);
    let report = CheckReport::inequality("per_step_claim", params, Scale::Log, local.h_z, rhs, tol);
    match eval_f(p.delta(), &local.joint) {
        Ok(f) => {
            let gap = (report.margin - f).abs();
            report
                .with_extra("f_delta", f)
                .with_extra("f_delta_gap", gap)
                .with_extra("h_xy", local.h_xy)
                .require(gap <= tol.log, "per-step margin differs from F_delta")
        }
        Err(_) => report.require(false, "F_delta undefined at the conditional joint"),
    }
}

/// `H(Z_i | Past) <= ((r+s)/2r)(H(X_i | Past) + H(Y_i | Past)) + log2(r+s) - s/r`,
/// cross-checked against `F_{s/r}` at the conditional joint of `(X_i, Y_i)`.
pub fn per_step_claim_check(t: &TripleModel, i: usize, past: &PrefixState, tol: &Tolerances) -> Result<CheckReport> {
    if past.i != i {
        return Err(Error::UnachievablePast { i });
    }
    let local = local_step(t, past)?;
    Ok(claim_report(t, i, past.x_prefix, past.y_prefix, &local, tol))
}

/// The per-step claim for every achievable past at coordinate `i`.
pub fn per_step_claims(t: &TripleModel, i: usize, tol: &Tolerances) -> Result<Vec<CheckReport>> {
    t.mass.check_coordinate(i)?;
    Ok(t.mass
        .joints_by_past(i)
        .iter()
        .map(|(&(xp, yp), cells)| {
            let weight: BigUint = cells.iter().sum();
            let local = LocalStep::from_cells(cells, &weight, t.param());
            claim_report(t, i, xp, yp, &local, tol)
        })
        .collect())
}

/// How the per-step claims and the conditioning reductions assemble into the
/// global entropy inequality.
#[derive(Debug, Clone, PartialEq)]
pub struct ProofDecomposition {
    /// Claim margin at coordinate `i`, averaged over pasts.
    pub step_margins: Vec<f64>,
    /// `H(X_i | X_{<i}) - H(X_i | Z_{<i})`.
    pub reduction_gaps_x: Vec<f64>,
    pub reduction_gaps_y: Vec<f64>,
    pub global_margin: f64,
    /// `sum step_margins + ((r+s)/2r) sum (gap_x + gap_y)`.
    pub reconstructed_margin: f64,
}

pub fn proof_decomposition(t: &TripleModel) -> ProofDecomposition {
    let p = t.param();
    let scale = entropy_scale(p);
    let constant = step_constant(p);
    let steps: Vec<StepEntropies> = (1..=t.n()).map(|i| t.mass.step_entropies(i)).collect();
    let step_margins: Vec<f64> = steps
        .iter()
        .map(|s| scale * (s.x_given_z + s.y_given_z) + constant - s.z_given_z)
        .collect();
    let reduction_gaps_x: Vec<f64> = steps.iter().map(|s| s.x_given_x - s.x_given_z).collect();
    let reduction_gaps_y: Vec<f64> = steps.iter().map(|s| s.y_given_y - s.y_given_z).collect();
    let reconstructed_margin = step_margins.iter().sum::<f64>()
        + scale * (reduction_gaps_x.iter().sum::<f64>() + reduction_gaps_y.iter().sum::<f64>());
    let global = check_global_entropy_inequality(t, &Tolerances::default());
    ProofDecomposition {
        step_margins,
        reduction_gaps_x,
        reduction_gaps_y,
        global_margin: global.margin,
        reconstructed_margin,
    }
}

/// Tolerance for reassembling the global margin from per-step pieces.
pub const ASSEMBLY_TOL: f64 = 1e-8;

/// Identity: per-step margins plus conditioning gaps give the global margin.
pub fn check_claim_assembly(t: &TripleModel, tol: &Tolerances) -> CheckReport {
    let d = proof_decomposition(t);
    let tol = Tolerances { log: tol.log.max(ASSEMBLY_TOL), ..*tol };
    CheckReport::identity("claim_assembly", t.params(), Scale::Log, d.reconstructed_margin, d.global_margin, &tol)
}

/// `H(X) + E[log2 t(X)] <= log2 sum_x t(x)` for `X ~ d` and nonnegative `t`
/// positive wherever `d` has mass.
pub fn log_sum_bound_check(t_fn: &CubeFunction, d: &Distribution, tol: &Tolerances) -> Result<CheckReport> {
    if d.len() != t_fn.len() {
        return Err(Error::TableLength {
            n: t_fn.n(),
            expected: t_fn.len(),
            found: d.len(),
        });
    }
    t_fn.ensure_nonnegative()?;
    let mut expected_log = 0.0;
    for (index, (&p, &v)) in d.probs().iter().zip(t_fn.values()).enumerate() {
        if p > 0.0 {
            if !(v > 0.0) {
                return Err(Error::NonPositiveOnSupport { index });
            }
            expected_log += p * v.log2();
        }
    }
    let lhs = d.entropy() + expected_log;
    let rhs = t_fn.values().iter().sum::<f64>().log2();
    let params = ReportParams {
        n: Some(t_fn.n()),
        ..ReportParams::default()
    }
    .with_digest(t_fn.digest());
    Ok(CheckReport::inequality("log_sum_bound", params, Scale::Log, lhs, rhs, tol))
}

fn weighted_support(f: &CubeFunction, set: &CubeFunction, name: &'static str) -> Result<Vec<(usize, u64)>> {
    let counts = f.to_counts()?;
    let mut out = Vec::new();
    for (index, (&c, &member)) in counts.iter().zip(set.values()).enumerate() {
        match (member == 1.0, c > 0) {
            (true, true) => out.push((index, c)),
            (false, false) => {}
            _ => return Err(Error::SupportMismatch { name, index }),
        }
    }
    Ok(out)
}

/// The weighted triple `(Z, a, b)` with `a` uniform in `1..=f(X)` and `b`
/// uniform in `1..=g(Y)`.
///
/// Verifies `H(Z, a, b) = H(Z) + E[log2 f(X)] + E[log2 g(Y)]` (laws taken
/// under the weighted triple, `H(Z)` by parts), that `H(Z, a, b)` is the log
/// of `sum r^a s^d f(x) g(y)`, and that the integer-weighted logarithmic
/// inequality follows from the entropy inequality plus the two log-sum bounds
/// for `t = f^{2r/(r+s)}` and `t = g^{2r/(r+s)}`. The report's sides are
/// that inequality's; the pieces are in the extras.
pub fn extended_triple_entropy(t: &TripleModel, f: &CubeFunction, g: &CubeFunction, tol: &Tolerances) -> Result<CheckReport> {
    t.xset.ensure_same_dim(f)?;
    t.yset.ensure_same_dim(g)?;
    let xs = weighted_support(f, &t.xset, "f")?;
    let ys = weighted_support(g, &t.yset, "g")?;
    let p = t.param();
    let n = t.n();
    let mass = PairMass::build(n, p, &xs, &ys)?;

    let h_zab = log2_big(&mass.total);
    let h_z = mass.entropy_z_by_parts();
    let fx = mass.marginal(true);
    let gy = mass.marginal(false);
    let expected_log = |marginal: &[BigUint], values: &CubeFunction| -> f64 {
        marginal
            .iter()
            .enumerate()
            .filter(|(_, w)| !w.is_zero())
            .map(|(x, w)| mass.p(w) * values.get(x).log2())
            .sum()
    };
    let e_log_f = expected_log(&fx, f);
    let e_log_g = expected_log(&gy, g);
    let identity_gap = (h_zab - (h_z + e_log_f + e_log_g)).abs();

    let scale = entropy_scale(p);
    let h_x = entropy_of_counts(&fx, &mass.total);
    let h_y = entropy_of_counts(&gy, &mass.total);
    let global_margin = scale * (h_x + h_y) + n as f64 * step_constant(p) - h_z;

    let q = p.holder_exponent();
    let powered = |h: &CubeFunction| CubeFunction::from_fn(h.n(), |x| h.get(x).powf(q)).expect("same shape");
    let (tf, tg) = (powered(f), powered(g));
    let law_x = Distribution::from_counts(&fx)?;
    let law_y = Distribution::from_counts(&gy)?;
    let bound_f = log_sum_bound_check(&tf, &law_x, tol)?;
    let bound_g = log_sum_bound_check(&tg, &law_y, tol)?;
    // scaled by (r+s)/2r, the bound for t = f^{2r/(r+s)} reads
    // scale H(X) + E log f <= scale log sum f^{2r/(r+s)}
    let margin_f = scale * bound_f.margin;
    let margin_g = scale * bound_g.margin;

    let rhs = n as f64 * step_constant(p) + scale * (bound_f.rhs + bound_g.rhs);
    let params = t.params().with_digest(f.digest()).with_digest(g.digest());
    let report = CheckReport::inequality("extended_triple", params, Scale::Log, h_zab, rhs, tol);
    let chain_gap = (report.margin - (global_margin + margin_f + margin_g)).abs();
    Ok(report
        .with_extra("h_zab", h_zab)
        .with_extra("h_z", h_z)
        .with_extra("e_log_f", e_log_f)
        .with_extra("e_log_g", e_log_g)
        .with_extra("identity_gap", identity_gap)
        .with_extra("global_margin", global_margin)
        .with_extra("log_sum_margin_f", margin_f)
        .with_extra("log_sum_margin_g", margin_g)
        .with_extra("chain_gap", chain_gap)
        .require(identity_gap <= tol.log, "H(Z,a,b) identity fails")
        .require(global_margin >= -tol.log, "entropy inequality fails under the weighted law")
        .require(margin_f >= -tol.log && margin_g >= -tol.log, "log-sum bound fails")
        .require(chain_gap <= tol.log, "bounds do not add up to the logarithmic inequality"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn full(n: usize) -> CubeFunction {
        CubeFunction::constant(n, 1.0).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&[1.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!(close(entropy(&[0.125; 8]).unwrap(), 3.0));
        assert!((entropy(&[1.0 / 3.0, 2.0 / 3.0]).unwrap() - 0.918_295_834_054_489_6).abs() < 1e-12);
        assert!(entropy(&[-0.1, 1.1]).is_err());
        assert!(Distribution::new(vec![0.5, 0.4]).is_err());
        assert!(Distribution::new(vec![0.5, -0.5, 1.0]).is_err());
        assert!(close(Distribution::uniform(5).unwrap().entropy(), 5f64.log2()));
    }

    #[test]
    fn entropy_of_z_examples() {
        let p = NoiseParam::new(2, 1).unwrap();
        let t = TripleModel::new(&full(1), &full(1), p).unwrap();
        assert_eq!(t.total_count(), &BigUint::from(6u8));
        assert!(close(entropy_of_z(&t), 6f64.log2()));

        let point = CubeFunction::indicator(4, [9]).unwrap();
        let t = TripleModel::new(&point, &point, NoiseParam::new(3, 2).unwrap()).unwrap();
        assert!(close(entropy_of_z(&t), 4.0 * 3f64.log2()));

        let a = CubeFunction::indicator(3, [0, 3, 5, 6]).unwrap();
        let t = TripleModel::new(&a, &a, NoiseParam::new(5, 0).unwrap()).unwrap();
        assert!(close(entropy_of_z(&t), (4.0 * 125.0f64).log2()));
        assert!(check_entropy_of_z(&t, &tol()).pass);
    }

    #[test]
    fn rejects_empty_and_disjoint_degenerate() {
        let p = NoiseParam::new(2, 1).unwrap();
        let empty = CubeFunction::constant(2, 0.0).unwrap();
        assert_eq!(TripleModel::new(&empty, &full(2), p).unwrap_err(), Error::EmptySet("X set"));
        let a = CubeFunction::indicator(2, [0]).unwrap();
        let b = CubeFunction::indicator(2, [3]).unwrap();
        assert_eq!(
            TripleModel::new(&a, &b, NoiseParam::new(2, 0).unwrap()).unwrap_err(),
            Error::EmptyTripleSupport
        );
    }

    #[test]
    fn chain_on_full_cube_is_iid() {
        let p = NoiseParam::new(2, 1).unwrap();
        let t = TripleModel::new(&full(2), &full(2), p).unwrap();
        let c = chain_rule_decompose(&t);
        for term in &c.z_terms {
            assert!(close(*term, 6f64.log2()));
        }
        assert!(close(c.h_z, 2.0 * 6f64.log2()));
        assert!(close(c.h_x, 2.0) && close(c.h_y, 2.0));
        assert!(check_chain_rule(&t, &tol()).iter().all(|r| r.pass));
    }

    #[test]
    fn chain_on_singletons() {
        let point = CubeFunction::indicator(3, [6]).unwrap();
        let t = TripleModel::new(&point, &point, NoiseParam::new(3, 1).unwrap()).unwrap();
        let c = chain_rule_decompose(&t);
        assert!(c.z_terms.iter().all(|&v| close(v, 3f64.log2())));
        assert!(c.x_terms.iter().all(|&v| v == 0.0));
        let b = marginal_entropy_bounds(&t);
        assert_eq!((b.h_x, b.log_x), (0.0, 0.0));
    }

    #[test]
    fn conditioning_on_full_cube_is_equality() {
        let t = TripleModel::new(&full(3), &full(3), NoiseParam::new(3, 2).unwrap()).unwrap();
        for i in 1..=3 {
            let (rx, ry) = conditioning_reduction_check(&t, i, &tol()).unwrap();
            assert!(rx.margin.abs() < 1e-12 && ry.margin.abs() < 1e-12);
        }
        assert!(conditioning_reduction_check(&t, 0, &tol()).is_err());
        assert!(conditioning_reduction_check(&t, 4, &tol()).is_err());
    }

    #[test]
    fn first_coordinate_has_empty_past() {
        let a = CubeFunction::indicator(3, [1, 2, 7]).unwrap();
        let b = CubeFunction::indicator(3, [0, 2, 3, 4]).unwrap();
        let t = TripleModel::new(&a, &b, NoiseParam::new(2, 1).unwrap()).unwrap();
        let (rx, ry) = conditioning_reduction_check(&t, 1, &tol()).unwrap();
        assert!(rx.margin.abs() < 1e-15 && ry.margin.abs() < 1e-15);
        let pasts = achievable_pasts(&t, 1).unwrap();
        assert_eq!(pasts.len(), 1);
        assert_eq!(&pasts[0].weight, t.total_count());
    }

    #[test]
    fn global_inequality_examples() {
        for (r, s) in [(2, 1), (3, 1), (3, 2), (1, 1), (4, 0)] {
            let t = TripleModel::new(&full(3), &full(3), NoiseParam::new(r, s).unwrap()).unwrap();
            let rep = check_global_entropy_inequality(&t, &tol());
            assert!(rep.margin.abs() < 1e-9, "(r,s)=({r},{s}) margin {}", rep.margin);
        }
        let point = CubeFunction::indicator(2, [1]).unwrap();
        let p = NoiseParam::new(2, 1).unwrap();
        let t = TripleModel::new(&point, &point, p).unwrap();
        let rep = check_global_entropy_inequality(&t, &tol());
        assert!(close(rep.lhs, 2.0));
        assert!(close(rep.margin, 2.0 * (1.5f64.log2() - 0.5)));
    }

    #[test]
    fn claim_on_full_cube_hits_minimum() {
        let p = NoiseParam::new(2, 1).unwrap();
        let t = TripleModel::new(&full(2), &full(2), p).unwrap();
        for past in achievable_pasts(&t, 2).unwrap() {
            let rep = per_step_claim_check(&t, 2, &past, &tol()).unwrap();
            assert!(rep.margin.abs() < 1e-12 && rep.pass);
            let joint = conditional_bit_joint(&t, &past).unwrap();
            let min = crate::fdelta::minimum_point(0.5);
            assert!(joint.l1_distance(&min) < 1e-15);
        }
    }

    #[test]
    fn claim_with_forced_past_is_three_zeros() {
        let point = CubeFunction::indicator(2, [0]).unwrap();
        let p = NoiseParam::new(2, 1).unwrap();
        let t = TripleModel::new(&point, &point, p).unwrap();
        let past = PrefixState { i: 2, x_prefix: 0, y_prefix: 0, weight: BigUint::from(2u8) };
        let rep = per_step_claim_check(&t, 2, &past, &tol()).unwrap();
        assert!(close(rep.margin, 1.5f64.log2() - 0.5));
        let bad = PrefixState { x_prefix: 1, ..past.clone() };
        assert_eq!(per_step_claim_check(&t, 2, &bad, &tol()).unwrap_err(), Error::UnachievablePast { i: 2 });
    }

    #[test]
    fn log_sum_examples() {
        let ones = CubeFunction::constant(3, 1.0).unwrap();
        let d = Distribution::new(vec![0.5, 0.25, 0.25, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let rep = log_sum_bound_check(&ones, &d, &tol()).unwrap();
        assert!(close(rep.lhs, 1.5) && close(rep.rhs, 3.0));

        let t = CubeFunction::new(2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let gibbs = Distribution::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let rep = log_sum_bound_check(&t, &gibbs, &tol()).unwrap();
        assert!(rep.margin.abs() < 1e-12);

        let zero_on_support = CubeFunction::new(2, vec![0.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(
            log_sum_bound_check(&zero_on_support, &gibbs, &tol()).unwrap_err(),
            Error::NonPositiveOnSupport { index: 0 }
        );
    }

    #[test]
    fn extended_triple_examples() {
        let p = NoiseParam::new(2, 1).unwrap();
        let t = TripleModel::new(&full(1), &full(1), p).unwrap();
        let f = CubeFunction::new(1, vec![2.0, 1.0]).unwrap();
        let rep = extended_triple_entropy(&t, &f, &f, &tol()).unwrap();
        assert!(close(rep.lhs, 14f64.log2()));
        assert!(rep.pass, "{rep:?}");

        let rep = extended_triple_entropy(&t, &full(1), &full(1), &tol()).unwrap();
        assert_eq!(rep.lhs, entropy_of_z(&t));
        assert!(rep.margin.abs() < 1e-12);

        let with_zero = CubeFunction::new(1, vec![2.0, 0.0]).unwrap();
        assert_eq!(
            extended_triple_entropy(&t, &with_zero, &f, &tol()).unwrap_err(),
            Error::SupportMismatch { name: "f", index: 1 }
        );
    }
}
