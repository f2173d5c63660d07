//! Streaming estimators of the PrunedPivot clustering cost.
//!
//! [`EstEa`] estimates the mismatches touching `A`, [`EstEb`] those inside
//! `B`, and [`C4Approx`] builds the reference set and runs both over shared
//! passes. [`SimpleSampling`] is the pair-sampling baseline.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::clustering::{find_pivot, PrunedPivotStream, ReferenceSet, ReferenceSetBuilder};
use crate::error::{Error, Result};
use crate::rank::{split_seed, RankFunction};
use crate::similarity::{Counted, NodeId, SimilarityOracle};
use crate::stream::{forward, run_multiplexed, Accounting, Meter, NodeStream, PassConsumer, RunOptions};

const LABEL_S1: u64 = 1;
const LABEL_S2: u64 = 2;
const LABEL_S: u64 = 3;
const LABEL_PAIRS: u64 = 4;
const LABEL_REP: u64 = 1000;

/// Est-EB flags a sampled neighbourhood larger than this multiple of `n^β`.
pub const DEGREE_SLACK: f64 = 4.0;

/// Fractions of the word budget given to `R`, `S1`, `S2 + D` and `S`.
pub const BUDGET_SHARES: [f64; 4] = [0.4, 0.3, 0.15, 0.15];

/// Words per stored item of `R`, `S1`, `S2` and `S`.
const ITEM_WORDS: [usize; 4] = [2, 2, 3, 3];

/// How sample sizes are chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpaceMode {
    /// Size formulas with their stated constants.
    Theory,
    /// `⌈f·n⌉` words split by [`BUDGET_SHARES`].
    Budget(f64),
    /// Size formulas with every constant multiplied by `c`.
    Test(f64),
}

impl SpaceMode {
    pub fn label(&self) -> &'static str {
        match self {
            SpaceMode::Theory => "theory",
            SpaceMode::Budget(_) => "budget",
            SpaceMode::Test(_) => "test",
        }
    }

    pub fn param(&self) -> Option<f64> {
        match *self {
            SpaceMode::Theory => None,
            SpaceMode::Budget(x) | SpaceMode::Test(x) => Some(x),
        }
    }
}

impl fmt::Display for SpaceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.param() {
            Some(x) => write!(f, "{}={x}", self.label()),
            None => f.write_str(self.label()),
        }
    }
}

impl FromStr for SpaceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::arg(format!("space mode `{s}`: expected theory, budget=F or test=C"));
        if s == "theory" {
            return Ok(SpaceMode::Theory);
        }
        let (kind, value) = s.split_once('=').ok_or_else(bad)?;
        let x: f64 = value.parse().map_err(|_| bad())?;
        match kind {
            "budget" => Ok(SpaceMode::Budget(x)),
            "test" => Ok(SpaceMode::Test(x)),
            _ => Err(bad()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorParams {
    pub k: usize,
    pub alpha: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub space: SpaceMode,
    pub normalize: bool,
    /// Independent repetitions run over the same passes; the median is reported.
    pub reps: usize,
}

impl Default for EstimatorParams {
    fn default() -> Self {
        EstimatorParams {
            k: 15,
            alpha: 0.0,
            epsilon: 0.1,
            seed: 0,
            space: SpaceMode::Theory,
            normalize: false,
            reps: 1,
        }
    }
}

impl EstimatorParams {
    pub fn beta(&self) -> f64 {
        (1.0 - self.alpha) / 4.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::param(format!("k must be at least 2, got {}", self.k)));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::param(format!("alpha must lie in [0, 1), got {}", self.alpha)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::param(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if self.reps == 0 {
            return Err(Error::param("reps must be at least 1"));
        }
        match self.space {
            SpaceMode::Budget(f) if !(f > 0.0 && f.is_finite()) => {
                Err(Error::param(format!("budget fraction must be positive, got {f}")))
            }
            SpaceMode::Test(c) if !(c > 0.0 && c <= 1.0) => {
                Err(Error::param(format!("test scale must lie in (0, 1], got {c}")))
            }
            _ => Ok(()),
        }
    }

    /// `ε n^{1-α}`, the additive slack of the guarantee.
    pub fn additive_slack(&self, n: usize) -> f64 {
        self.epsilon * (n as f64).powf(1.0 - self.alpha)
    }
}

/// Sizes of `R`, `S1`, `S2` and `S`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SampleSizes {
    pub r: usize,
    pub t1: usize,
    pub t2: usize,
    pub t: usize,
}

fn clamp_size(x: f64, n: usize) -> usize {
    if x >= n as f64 {
        n
    } else {
        (x.ceil() as usize).clamp(1, n.max(1))
    }
}

impl SampleSizes {
    /// Every sample holds the whole stream.
    pub fn full(n: usize) -> Self {
        SampleSizes { r: n, t1: n, t2: n, t: n }
    }

    /// Size formulas scaled by `scale`; `epsilon` is the estimators' own
    /// accuracy parameter.
    pub fn theory(n: usize, k: usize, alpha: f64, epsilon: f64, scale: f64) -> Self {
        let nf = n as f64;
        let ln = nf.ln().max(0.0);
        let beta = (1.0 - alpha) / 4.0;
        let e2 = epsilon * epsilon;
        SampleSizes {
            r: clamp_size(scale * 48.0 * k as f64 * nf.powf(1.0 - beta) * ln, n),
            t1: clamp_size(scale * 12.0 / e2 * nf.powf(1.0 - beta) * ln, n),
            t2: clamp_size(scale * 32.0 / e2 * nf.powf(alpha + beta) * ln, n),
            t: clamp_size(scale * 8.0 / e2 * nf.powf(alpha + 2.0 * beta) * ln, n),
        }
    }

    /// Splits `⌈fraction·n⌉` words by [`BUDGET_SHARES`].
    pub fn budget(n: usize, fraction: f64) -> Result<Self> {
        let words = (fraction * n as f64).ceil();
        let size = |i: usize| -> Result<usize> {
            let s = (words * BUDGET_SHARES[i] / ITEM_WORDS[i] as f64).floor() as usize;
            if s == 0 {
                return Err(Error::param(format!(
                    "budget of {words} words leaves no room for every sample at n = {n}"
                )));
            }
            Ok(s.min(n))
        };
        Ok(SampleSizes {
            r: size(0)?,
            t1: size(1)?,
            t2: size(2)?,
            t: size(3)?,
        })
    }

    /// Sizes used by [`C4Approx`], whose estimators run at accuracy `ε/8`.
    pub fn for_params(n: usize, p: &EstimatorParams) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("empty stream"));
        }
        let sub = p.epsilon / 8.0;
        Ok(match p.space {
            SpaceMode::Theory => Self::theory(n, p.k, p.alpha, sub, 1.0),
            SpaceMode::Test(c) => Self::theory(n, p.k, p.alpha, sub, c),
            SpaceMode::Budget(f) => Self::budget(n, f)?,
        })
    }

    /// Budgeted words: the samples and their per-item counters.
    pub fn words(&self) -> u64 {
        let sizes = [self.r, self.t1, self.t2, self.t];
        sizes.iter().zip(ITEM_WORDS).map(|(&s, w)| (s * w) as u64).sum()
    }
}

/// Settings shared by [`EstEa`] and [`EstEb`].
#[derive(Clone, Copy, Debug)]
pub struct SubParams {
    pub k: usize,
    pub beta: f64,
    pub sizes: SampleSizes,
    pub seed: u64,
}

/// `X ≥ 2 t1 / n^{1-β}`: the node's degree is estimated directly from `S1`.
pub fn is_high(x: u64, t1: usize, n: usize, beta: f64) -> bool {
    x as f64 >= 2.0 * t1 as f64 / (n as f64).powf(1.0 - beta)
}

/// Membership of `(u, v)` in `E_mis_A`, decided from `R` alone.
pub fn in_ea(
    u: NodeId,
    v: NodeId,
    rf: &RankFunction,
    reference: &ReferenceSet,
    k: usize,
    oracle: &dyn SimilarityOracle,
) -> Result<bool> {
    if u == v {
        return Err(Error::arg(format!("In-EA needs distinct nodes, got ({u}, {u})")));
    }
    let pu = find_pivot(u, rf, reference, k, oracle);
    let pv = find_pivot(v, rf, reference, k, oracle);
    Ok(in_ea_with(u, pu, v, pv, oracle))
}

#[inline]
fn in_ea_with(u: NodeId, pu: Option<NodeId>, v: NodeId, pv: Option<NodeId>, oracle: &dyn SimilarityOracle) -> bool {
    match (pu, pv) {
        (None, None) => false,
        (None, _) | (_, None) => oracle.sim(u, v),
        (Some(a), Some(b)) => (a == b) != oracle.sim(u, v),
    }
}

/// Algorithm R reservoir; `seen` counts offered items.
struct Reservoir {
    cap: usize,
    seen: u64,
    items: Vec<NodeId>,
    rng: ChaCha8Rng,
}

impl Reservoir {
    fn new(cap: usize, seed: u64) -> Self {
        Reservoir {
            cap,
            seen: 0,
            items: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Slot the item went into, if kept.
    fn offer(&mut self, x: NodeId) -> Option<usize> {
        self.seen += 1;
        if self.items.len() < self.cap {
            self.items.push(x);
            return Some(self.items.len() - 1);
        }
        let i = self.rng.gen_range(0..self.seen);
        ((i as usize) < self.cap).then(|| {
            self.items[i as usize] = x;
            i as usize
        })
    }

    /// `seen / len`, the weight of one kept item.
    fn scale(&self) -> f64 {
        if self.items.is_empty() {
            0.0
        } else {
            self.seen as f64 / self.items.len() as f64
        }
    }
}

fn need_reference(r: &Option<Arc<ReferenceSet>>) -> Result<&ReferenceSet> {
    r.as_deref().ok_or_else(|| Error::arg("reference set not provided"))
}

/// Est-EA: 3 passes.
pub struct EstEa<'a> {
    rf: &'a RankFunction,
    oracle: &'a dyn SimilarityOracle,
    reference: Option<Arc<ReferenceSet>>,
    n: usize,
    k: usize,
    beta: f64,
    t1: usize,
    first: usize,
    pass: usize,
    s1: Reservoir,
    s1_pivots: Vec<Option<NodeId>>,
    s2: Reservoir,
    s2_pivots: Vec<Option<NodeId>>,
    d: Vec<u64>,
    d_high: f64,
    high: u64,
    result: Option<f64>,
}

impl<'a> EstEa<'a> {
    pub fn new(n: usize, p: &SubParams, rf: &'a RankFunction, oracle: &'a dyn SimilarityOracle) -> Self {
        EstEa {
            rf,
            oracle,
            reference: None,
            n,
            k: p.k,
            beta: p.beta,
            t1: p.sizes.t1,
            first: 1,
            pass: 0,
            s1: Reservoir::new(p.sizes.t1, split_seed(p.seed, LABEL_S1)),
            s1_pivots: Vec::new(),
            s2: Reservoir::new(p.sizes.t2, split_seed(p.seed, LABEL_S2)),
            s2_pivots: Vec::new(),
            d: Vec::new(),
            d_high: 0.0,
            high: 0,
            result: None,
        }
    }

    pub fn with_reference(mut self, reference: Arc<ReferenceSet>) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn set_reference(&mut self, reference: Arc<ReferenceSet>) {
        self.reference = Some(reference);
    }

    /// Shifts the pass window to start at `pass` of the parent schedule.
    pub fn starting_at(mut self, pass: usize) -> Self {
        self.first = pass;
        self
    }

    pub fn result(&self) -> Option<f64> {
        self.result
    }

    /// Stream nodes whose degree was estimated from `S1`.
    pub fn high_count(&self) -> u64 {
        self.high
    }

    /// Size of the low-degree substream `L`.
    pub fn low_count(&self) -> u64 {
        self.s2.seen
    }

    fn pivot(&self, u: NodeId) -> Result<Option<NodeId>> {
        Ok(find_pivot(u, self.rf, need_reference(&self.reference)?, self.k, self.oracle))
    }
}

impl PassConsumer for EstEa<'_> {
    fn name(&self) -> &str {
        "est-ea"
    }

    fn passes(&self) -> usize {
        3
    }

    fn first_pass(&self) -> usize {
        self.first
    }

    fn begin_pass(&mut self, pass: usize, meter: &mut Meter) -> Result<()> {
        self.pass = pass;
        if pass == 1 {
            need_reference(&self.reference)?;
            // n_ℓ and d̃_A.
            meter.census(2)?;
        }
        Ok(())
    }

    fn on_item(&mut self, item: NodeId, meter: &mut Meter) -> Result<()> {
        match self.pass {
            1 => {
                let before = self.s1.items.len();
                self.s1.offer(item);
                meter.census((self.s1.items.len() - before) as i64)?;
            }
            2 => {
                let pj = self.pivot(item)?;
                let mut x = 0u64;
                for (&u, &pu) in self.s1.items.iter().zip(&self.s1_pivots) {
                    if u != item && in_ea_with(u, pu, item, pj, self.oracle) {
                        x += 1;
                    }
                }
                if is_high(x, self.t1, self.n, self.beta) {
                    self.high += 1;
                    self.d_high += self.n as f64 * x as f64 / self.t1 as f64;
                } else {
                    let before = self.s2.items.len();
                    if let Some(slot) = self.s2.offer(item) {
                        if slot == self.s2_pivots.len() {
                            self.s2_pivots.push(pj);
                            self.d.push(0);
                        } else {
                            self.s2_pivots[slot] = pj;
                        }
                    }
                    // Node, cached pivot and counter.
                    meter.census(3 * (self.s2.items.len() - before) as i64)?;
                }
            }
            _ => {
                let pj = self.pivot(item)?;
                for i in 0..self.s2.items.len() {
                    let u = self.s2.items[i];
                    if u != item && in_ea_with(u, self.s2_pivots[i], item, pj, self.oracle) {
                        self.d[i] += 1;
                    }
                }
            }
        }
        Ok(())
    }

    fn end_pass(&mut self, pass: usize, meter: &mut Meter) -> Result<()> {
        match pass {
            1 => {
                let reference = need_reference(&self.reference)?;
                self.s1_pivots = self
                    .s1
                    .items
                    .iter()
                    .map(|&u| find_pivot(u, self.rf, reference, self.k, self.oracle))
                    .collect();
                meter.census(self.s1_pivots.len() as i64)?;
            }
            3 => {
                let low: u64 = self.d.iter().sum();
                let total = self.d_high + self.s2.scale() * low as f64;
                self.result = Some(total / 2.0);
            }
            _ => {}
        }
        Ok(())
    }
}

/// Est-EB: `k + 3` passes.
pub struct EstEb<'a> {
    rf: &'a RankFunction,
    oracle: &'a dyn SimilarityOracle,
    reference: Option<Arc<ReferenceSet>>,
    k: usize,
    degree_cap: f64,
    first: usize,
    pass: usize,
    s: Reservoir,
    gamma: Vec<Vec<NodeId>>,
    gamma_words: i64,
    finders: Vec<PrunedPivotStream<'a>>,
    finder_of: HashMap<NodeId, usize>,
    n_out: Vec<u64>,
    cap_warnings: u64,
    result: Option<f64>,
}

impl<'a> EstEb<'a> {
    pub fn new(n: usize, p: &SubParams, rf: &'a RankFunction, oracle: &'a dyn SimilarityOracle) -> Result<Self> {
        if p.k == 0 {
            return Err(Error::param("k must be at least 1"));
        }
        Ok(EstEb {
            rf,
            oracle,
            reference: None,
            k: p.k,
            degree_cap: DEGREE_SLACK * (n as f64).powf(p.beta),
            first: 1,
            pass: 0,
            s: Reservoir::new(p.sizes.t, split_seed(p.seed, LABEL_S)),
            gamma: Vec::new(),
            gamma_words: 0,
            finders: Vec::new(),
            finder_of: HashMap::new(),
            n_out: Vec::new(),
            cap_warnings: 0,
            result: None,
        })
    }

    pub fn with_reference(mut self, reference: Arc<ReferenceSet>) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn set_reference(&mut self, reference: Arc<ReferenceSet>) {
        self.reference = Some(reference);
    }

    pub fn starting_at(mut self, pass: usize) -> Self {
        self.first = pass;
        self
    }

    pub fn result(&self) -> Option<f64> {
        self.result
    }

    /// `|B|` as counted in pass 1.
    pub fn n_b(&self) -> u64 {
        self.s.seen
    }

    /// Sampled neighbourhoods that exceeded the degree cap.
    pub fn cap_warnings(&self) -> u64 {
        self.cap_warnings
    }

    /// Sampled clusters after pruning, aligned with the sample.
    pub fn clusters(&self) -> impl Iterator<Item = (NodeId, &[NodeId])> {
        self.s.items.iter().copied().zip(self.gamma.iter().map(Vec::as_slice))
    }

    fn in_b(&self, u: NodeId) -> Result<bool> {
        let reference = need_reference(&self.reference)?;
        Ok(find_pivot(u, self.rf, reference, self.k, self.oracle).is_none())
    }

    fn set_gamma_words(&mut self, meter: &mut Meter) -> Result<()> {
        let words: i64 = self.gamma.iter().map(|g| g.len() as i64).sum();
        meter.census(words - self.gamma_words)?;
        self.gamma_words = words;
        Ok(())
    }
}

impl PassConsumer for EstEb<'_> {
    fn name(&self) -> &str {
        "est-eb"
    }

    fn passes(&self) -> usize {
        self.k + 3
    }

    fn first_pass(&self) -> usize {
        self.first
    }

    fn begin_pass(&mut self, pass: usize, meter: &mut Meter) -> Result<()> {
        self.pass = pass;
        if pass == 1 {
            need_reference(&self.reference)?;
            // n_B.
            meter.census(1)?;
        } else if pass == 2 {
            self.gamma = vec![Vec::new(); self.s.items.len()];
            // n_in and n_out per sample.
            meter.census(2 * self.s.items.len() as i64)?;
        } else if pass == 3 {
            let mut nodes: Vec<NodeId> = self.gamma.iter().flatten().copied().collect();
            nodes.sort_unstable();
            nodes.dedup();
            for v in nodes {
                self.finder_of.insert(v, self.finders.len());
                self.finders.push(PrunedPivotStream::new(v, self.rf, self.k, self.oracle)?);
            }
        }
        if (3..self.k + 3).contains(&pass) {
            for f in &mut self.finders {
                f.begin_pass(pass - 2, meter)?;
            }
        }
        Ok(())
    }

    fn on_item(&mut self, item: NodeId, meter: &mut Meter) -> Result<()> {
        let pass = self.pass;
        if pass == 1 {
            if self.in_b(item)? {
                let before = self.s.items.len();
                self.s.offer(item);
                meter.census((self.s.items.len() - before) as i64)?;
            }
        } else if pass == 2 {
            let mut added = 0;
            for (i, &u) in self.s.items.iter().enumerate() {
                if self.oracle.sim(u, item) {
                    self.gamma[i].push(item);
                    added += 1;
                }
            }
            self.gamma_words += added;
            meter.census(added)?;
        } else if pass < self.k + 3 {
            for f in &mut self.finders {
                f.on_item(item, meter)?;
            }
        } else if self.in_b(item)? {
            for (i, g) in self.gamma.iter().enumerate() {
                if g.binary_search(&item).is_ok() {
                    continue;
                }
                self.n_out[i] += g.iter().filter(|&&v| self.oracle.sim(v, item)).count() as u64;
            }
        }
        Ok(())
    }

    fn end_pass(&mut self, pass: usize, meter: &mut Meter) -> Result<()> {
        if pass == 2 {
            self.cap_warnings = self
                .gamma
                .iter()
                .filter(|g| (g.len().saturating_sub(1)) as f64 > self.degree_cap)
                .count() as u64;
        }
        if (3..self.k + 3).contains(&pass) {
            for f in &mut self.finders {
                f.end_pass(pass - 2, meter)?;
            }
        }
        if pass == self.k + 2 {
            for (i, g) in self.gamma.iter_mut().enumerate() {
                let center = self.s.items[i];
                g.retain(|v| self.finders[self.finder_of[v]].result() == Some(center));
                g.sort_unstable();
            }
            for f in &mut self.finders {
                f.release(meter)?;
            }
            self.finders.clear();
            self.finder_of.clear();
            self.n_out = vec![0; self.gamma.len()];
            self.set_gamma_words(meter)?;
        }
        if pass == self.k + 3 {
            let mut sum = 0.0;
            for (g, &out) in self.gamma.iter().zip(&self.n_out) {
                let mut n_in = 0u64;
                for (a, &v1) in g.iter().enumerate() {
                    for &v2 in &g[a + 1..] {
                        n_in += u64::from(!self.oracle.sim(v1, v2));
                    }
                }
                sum += n_in as f64 + out as f64 / 2.0;
            }
            self.result = Some(self.s.scale() * sum);
        }
        Ok(())
    }
}

/// Median of the values; the mean of the middle two for even counts.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.is_empty() {
        f64::NAN
    } else if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

/// C4Approx: builds `R` in pass 1, then runs Est-EA and Est-EB over passes
/// `2 ..= k + 4`, once per repetition.
pub struct C4Approx<'a> {
    params: EstimatorParams,
    n: usize,
    sizes: SampleSizes,
    pass: usize,
    builder: ReferenceSetBuilder<'a>,
    reference: Option<Arc<ReferenceSet>>,
    reps: Vec<(EstEa<'a>, EstEb<'a>)>,
}

impl<'a> C4Approx<'a> {
    pub fn new(
        n: usize,
        params: &EstimatorParams,
        sizes: SampleSizes,
        rf: &'a RankFunction,
        oracle: &'a dyn SimilarityOracle,
    ) -> Result<Self> {
        params.validate()?;
        let mut reps = Vec::with_capacity(params.reps);
        for rep in 0..params.reps {
            let sub = SubParams {
                k: params.k,
                beta: params.beta(),
                sizes,
                seed: rep_seed(params.seed, rep),
            };
            let ea = EstEa::new(n, &sub, rf, oracle).starting_at(2);
            let eb = EstEb::new(n, &sub, rf, oracle)?.starting_at(2);
            reps.push((ea, eb));
        }
        Ok(C4Approx {
            params: params.clone(),
            n,
            sizes,
            pass: 0,
            builder: ReferenceSetBuilder::new(rf, sizes.r)?,
            reference: None,
            reps,
        })
    }

    pub fn sizes(&self) -> SampleSizes {
        self.sizes
    }

    pub fn reference(&self) -> Option<&ReferenceSet> {
        self.reference.as_deref()
    }

    /// `(m̃_A, m̃_B)` per repetition.
    pub fn parts(&self) -> Vec<(f64, f64)> {
        self.reps
            .iter()
            .filter_map(|(ea, eb)| Some((ea.result()?, eb.result()?)))
            .collect()
    }

    pub fn cap_warnings(&self) -> u64 {
        self.reps.iter().map(|(_, eb)| eb.cap_warnings()).sum()
    }

    /// Output of one repetition.
    pub fn combine(&self, m_a: f64, m_b: f64) -> f64 {
        if self.params.normalize {
            let eps = self.params.epsilon;
            (m_a + m_b + 0.375 * self.params.additive_slack(self.n)) / (1.0 - eps / 8.0)
        } else {
            m_a + m_b
        }
    }

    /// Median over repetitions; `None` before the last pass.
    pub fn result(&self) -> Option<f64> {
        let parts = self.parts();
        if parts.len() < self.reps.len() {
            return None;
        }
        let values: Vec<f64> = parts.iter().map(|&(a, b)| self.combine(a, b)).collect();
        Some(median(&values))
    }
}

fn rep_seed(seed: u64, rep: usize) -> u64 {
    if rep == 0 {
        seed
    } else {
        split_seed(seed, LABEL_REP + rep as u64)
    }
}

impl PassConsumer for C4Approx<'_> {
    fn name(&self) -> &str {
        "c4approx"
    }

    fn passes(&self) -> usize {
        self.params.k + 4
    }

    fn begin_pass(&mut self, pass: usize, meter: &mut Meter) -> Result<()> {
        self.pass = pass;
        if pass == 1 {
            return self.builder.begin_pass(1, meter);
        }
        for (ea, eb) in &mut self.reps {
            forward::begin(ea, pass, meter)?;
            forward::begin(eb, pass, meter)?;
        }
        Ok(())
    }

    #[inline]
    fn on_item(&mut self, item: NodeId, meter: &mut Meter) -> Result<()> {
        if self.pass == 1 {
            return self.builder.on_item(item, meter);
        }
        for (ea, eb) in &mut self.reps {
            forward::item(ea, self.pass, item, meter)?;
            forward::item(eb, self.pass, item, meter)?;
        }
        Ok(())
    }

    fn end_pass(&mut self, pass: usize, meter: &mut Meter) -> Result<()> {
        if pass == 1 {
            self.builder.end_pass(1, meter)?;
            let reference = Arc::new(self.builder.take().expect("reference set built"));
            for (ea, eb) in &mut self.reps {
                ea.set_reference(reference.clone());
                eb.set_reference(reference.clone());
            }
            self.reference = Some(reference);
            return Ok(());
        }
        for (ea, eb) in &mut self.reps {
            forward::end(ea, pass, meter)?;
            forward::end(eb, pass, meter)?;
        }
        Ok(())
    }
}

/// Samples `q` uniform unordered pairs, stores their endpoints in pass 1 and
/// resolves every endpoint's pivot with streaming PrunedPivot in passes
/// `2 ..= k + 1`.
///
/// When `q` reaches `C(n, 2)` every pair is used exactly once instead.
pub struct SimpleSampling<'a> {
    n: usize,
    k: usize,
    pass: usize,
    pairs: Vec<(NodeId, NodeId)>,
    finders: Vec<PrunedPivotStream<'a>>,
    finder_of: HashMap<NodeId, usize>,
    held: Vec<bool>,
    result: Option<f64>,
    oracle: &'a dyn SimilarityOracle,
}

impl<'a> SimpleSampling<'a> {
    pub fn new(
        n: usize,
        q: usize,
        k: usize,
        seed: u64,
        rf: &'a RankFunction,
        oracle: &'a dyn SimilarityOracle,
    ) -> Result<Self> {
        if q == 0 {
            return Err(Error::param("q must be at least 1"));
        }
        if k == 0 {
            return Err(Error::param("k must be at least 1"));
        }
        let all = n as u64 * n.saturating_sub(1) as u64 / 2;
        let pairs: Vec<(NodeId, NodeId)> = if q as u64 >= all {
            (0..n)
                .flat_map(|u| (u + 1..n).map(move |v| (NodeId::from(u), NodeId::from(v))))
                .collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, LABEL_PAIRS));
            (0..q)
                .map(|_| {
                    let u = rng.gen_range(0..n);
                    let mut v = rng.gen_range(0..n - 1);
                    if v >= u {
                        v += 1;
                    }
                    (NodeId::from(u.min(v)), NodeId::from(u.max(v)))
                })
                .collect()
        };
        let mut nodes: Vec<NodeId> = pairs.iter().flat_map(|&(u, v)| [u, v]).collect();
        nodes.sort_unstable();
        nodes.dedup();
        let mut finders = Vec::with_capacity(nodes.len());
        let mut finder_of = HashMap::with_capacity(nodes.len());
        for v in nodes {
            finder_of.insert(v, finders.len());
            finders.push(PrunedPivotStream::new(v, rf, k, oracle)?);
        }
        Ok(SimpleSampling {
            n,
            k,
            pass: 0,
            pairs,
            held: vec![false; finders.len()],
            finders,
            finder_of,
            result: None,
            oracle,
        })
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn result(&self) -> Option<f64> {
        self.result
    }
}

impl PassConsumer for SimpleSampling<'_> {
    fn name(&self) -> &str {
        "simple-sampling"
    }

    fn passes(&self) -> usize {
        self.k + 1
    }

    fn begin_pass(&mut self, pass: usize, meter: &mut Meter) -> Result<()> {
        self.pass = pass;
        if pass == 1 {
            // Pair endpoints.
            meter.census(2 * self.pairs.len() as i64)?;
        } else {
            for f in &mut self.finders {
                f.begin_pass(pass - 1, meter)?;
            }
        }
        Ok(())
    }

    fn on_item(&mut self, item: NodeId, meter: &mut Meter) -> Result<()> {
        if self.pass == 1 {
            if let Some(&i) = self.finder_of.get(&item) {
                self.held[i] = true;
            }
            return Ok(());
        }
        for f in &mut self.finders {
            f.on_item(item, meter)?;
        }
        Ok(())
    }

    fn end_pass(&mut self, pass: usize, meter: &mut Meter) -> Result<()> {
        if pass == 1 {
            if let Some(i) = self.held.iter().position(|h| !h) {
                return Err(Error::Format(format!(
                    "sampled node {} never arrived",
                    self.finders[i].node()
                )));
            }
            return Ok(());
        }
        for f in &mut self.finders {
            f.end_pass(pass - 1, meter)?;
        }
        if pass == self.k + 1 {
            let pivot = |u: NodeId| self.finders[self.finder_of[&u]].result();
            let mut mismatches = 0u64;
            for &(u, v) in &self.pairs {
                let same = pivot(u) == pivot(v);
                mismatches += u64::from(self.oracle.sim(u, v) != same);
            }
            let all = self.n as f64 * (self.n as f64 - 1.0) / 2.0;
            self.result = Some(if self.pairs.is_empty() {
                0.0
            } else {
                mismatches as f64 * all / self.pairs.len() as f64
            });
        }
        Ok(())
    }
}

/// Estimate and resources of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub accounting: Accounting,
    /// Neighbourhoods above the degree cap seen by Est-EB.
    pub cap_warnings: u64,
}

/// Runs C4Approx with `π` seeded from `params.seed`.
pub fn run_c4approx(
    stream: &NodeStream,
    params: &EstimatorParams,
    oracle: &dyn SimilarityOracle,
    options: RunOptions,
) -> Result<Estimate> {
    let sizes = SampleSizes::for_params(stream.n(), params)?;
    run_c4approx_with(stream, params, sizes, oracle, options)
}

/// Runs C4Approx with explicit sample sizes.
pub fn run_c4approx_with(
    stream: &NodeStream,
    params: &EstimatorParams,
    sizes: SampleSizes,
    oracle: &dyn SimilarityOracle,
    options: RunOptions,
) -> Result<Estimate> {
    let counted = Counted::new(oracle);
    let rf = RankFunction::new(params.seed);
    let mut c4 = C4Approx::new(stream.n(), params, sizes, &rf, &counted)?;
    let mut accounting = run_multiplexed(stream, &mut [&mut c4], options)?;
    accounting.oracle_calls = counted.query_count();
    Ok(Estimate {
        value: c4.result().expect("all passes ran"),
        accounting,
        cap_warnings: c4.cap_warnings(),
    })
}

/// Runs Est-EA alone against a given reference set.
pub fn run_est_ea(
    stream: &NodeStream,
    p: &SubParams,
    rf: &RankFunction,
    reference: Arc<ReferenceSet>,
    oracle: &dyn SimilarityOracle,
) -> Result<(f64, Accounting)> {
    let counted = Counted::new(oracle);
    let mut ea = EstEa::new(stream.n(), p, rf, &counted).with_reference(reference);
    let mut acc = run_multiplexed(stream, &mut [&mut ea], RunOptions::default())?;
    acc.oracle_calls = counted.query_count();
    Ok((ea.result().expect("all passes ran"), acc))
}

/// Runs Est-EB alone against a given reference set.
pub fn run_est_eb(
    stream: &NodeStream,
    p: &SubParams,
    rf: &RankFunction,
    reference: Arc<ReferenceSet>,
    oracle: &dyn SimilarityOracle,
) -> Result<(f64, Accounting)> {
    let counted = Counted::new(oracle);
    let mut eb = EstEb::new(stream.n(), p, rf, &counted)?.with_reference(reference);
    let mut acc = run_multiplexed(stream, &mut [&mut eb], RunOptions::default())?;
    acc.oracle_calls = counted.query_count();
    Ok((eb.result().expect("all passes ran"), acc))
}

/// Runs SimpleSampling with `π` seeded from `seed`.
pub fn run_simple_sampling(
    stream: &NodeStream,
    q: usize,
    k: usize,
    seed: u64,
    oracle: &dyn SimilarityOracle,
    options: RunOptions,
) -> Result<Estimate> {
    let counted = Counted::new(oracle);
    let rf = RankFunction::new(seed);
    let mut ss = SimpleSampling::new(stream.n(), q, k, seed, &rf, &counted)?;
    let mut accounting = run_multiplexed(stream, &mut [&mut ss], options)?;
    accounting.oracle_calls = counted.query_count();
    Ok(Estimate {
        value: ss.result().expect("all passes ran"),
        accounting,
        cap_warnings: 0,
    })
}

/// Pairs SimpleSampling may keep within the words budgeted for C4Approx.
pub fn matched_pairs(sizes: &SampleSizes) -> usize {
    (sizes.words() / 2).max(1) as usize
}
