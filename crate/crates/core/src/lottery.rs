//! Ten-bit lottery number combiner and the probability arithmetic around it.
//!
//! A number is assembled from ten predicted bits as
//! `<b1..b5>₂ + <b6..b9>₂ + <b10>₂`, so values range over 0..=47 only: 48 and
//! 49 of the 6-of-49 pool can never be produced, and 0 (not in the pool)
//! comes from the all-zero pattern. Six numbers are collected one after the
//! other, discarding duplicates and invalid values.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, SimRng};
use crate::stats::wilson_ci;

pub const POOL_MAX: u32 = 49;
pub const NUMBERS_PER_DRAW: usize = 6;
pub const BITS_PER_NUMBER: usize = 10;
pub const DEFAULT_MAX_ROUNDS: u32 = 1000;
/// Largest value the combiner can produce: 31 + 15 + 1.
pub const MAX_ENCODABLE: u32 = 47;

/// Figures as printed for the scheme.
pub mod claimed {
    pub const P_BIT: f64 = 0.7175;
    pub const P_WIN: f64 = 0.036_159_22;
    pub const P_CHANCE: f64 = 7.151_12e-8;
    pub const COMBINATIONS: u64 = 13_983_816;
}

/// Ordered bits `b1..bn`, most significant first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BitVector(Vec<u8>);

impl BitVector {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::domain("bit vector must hold at least one bit"));
        }
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::domain(format!("bits must be 0 or 1, found {b}")));
        }
        Ok(Self(bits))
    }

    /// The `width` low bits of `value`, most significant first.
    pub fn from_value(value: u64, width: usize) -> Result<Self> {
        if width == 0 || width > 64 || (width < 64 && value >> width != 0) {
            return Err(Error::domain(format!(
                "{value} does not fit in {width} bits"
            )));
        }
        Self::new((0..width).rev().map(|i| ((value >> i) & 1) as u8).collect())
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `<b1..bn>₂ = Σ b_i · 2^(n−i)`.
pub fn encode_bits(bits: &BitVector) -> Result<u64> {
    if bits.is_empty() {
        return Err(Error::domain("cannot encode an empty bit vector"));
    }
    if bits.len() > 64 {
        return Err(Error::domain(format!(
            "{} bits overflow a 64-bit value",
            bits.len()
        )));
    }
    Ok(bits
        .bits()
        .iter()
        .fold(0u64, |acc, &b| (acc << 1) | u64::from(b)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Combined {
    pub value: u32,
    /// Whether `value` lies in the pool `1..=49`.
    pub valid: bool,
}

/// `<b1..b5>₂ + <b6..b9>₂ + <b10>₂` for exactly ten bits.
pub fn combine_win(bits: &BitVector) -> Result<Combined> {
    if bits.len() != BITS_PER_NUMBER {
        return Err(Error::domain(format!(
            "combiner takes exactly {BITS_PER_NUMBER} bits, got {}",
            bits.len()
        )));
    }
    let b = bits.bits();
    let part = |range: std::ops::Range<usize>| {
        encode_bits(&BitVector(b[range].to_vec())).expect("non-empty slice") as u32
    };
    let value = part(0..5) + part(5..9) + part(9..10);
    Ok(Combined {
        value,
        valid: (1..=POOL_MAX).contains(&value),
    })
}

/// Greedy split `t = a + b + c` with `a <= 31`, `b <= 15`, `c <= 1`.
pub fn decompose_number(t: u32) -> Result<(u32, u32, u32)> {
    if t > MAX_ENCODABLE {
        return Err(Error::Unrepresentable(t));
    }
    let a = t.min(31);
    let b = (t - a).min(15);
    Ok((a, b, t - a - b))
}

/// The ten bits the canonical decomposition assigns to `t`.
pub fn canonical_bits(t: u32) -> Result<BitVector> {
    let (a, b, c) = decompose_number(t)?;
    let mut bits = BitVector::from_value(u64::from(a), 5)?.0;
    bits.extend(BitVector::from_value(u64::from(b), 4)?.0);
    bits.push(c as u8);
    BitVector::new(bits)
}

/// Six distinct numbers from the pool, in the order they were drawn.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LotteryDraw {
    numbers: Vec<u32>,
}

impl LotteryDraw {
    pub fn new(numbers: Vec<u32>) -> Result<Self> {
        if numbers.len() != NUMBERS_PER_DRAW {
            return Err(Error::domain(format!(
                "a draw has {NUMBERS_PER_DRAW} numbers, got {}",
                numbers.len()
            )));
        }
        if let Some(n) = numbers.iter().find(|n| !(1..=POOL_MAX).contains(*n)) {
            return Err(Error::domain(format!(
                "{n} is outside the pool 1..={POOL_MAX}"
            )));
        }
        if numbers.iter().collect::<BTreeSet<_>>().len() != numbers.len() {
            return Err(Error::domain(format!("draw {numbers:?} repeats a number")));
        }
        Ok(Self { numbers })
    }

    pub fn numbers(&self) -> &[u32] {
        &self.numbers
    }

    pub fn sorted(&self) -> Vec<u32> {
        let mut v = self.numbers.clone();
        v.sort_unstable();
        v
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub draw: LotteryDraw,
    /// Rounds consumed, one fresh cup of tea-leaves per round for each net.
    pub rounds: u32,
    /// Values discarded as duplicates or outside the pool, in order.
    pub rejected: Vec<u32>,
}

/// Collects six distinct valid numbers from `source`, one ten-bit round at a
/// time. Duplicates and out-of-pool values (only 0 in practice) are discarded
/// and another round is added.
pub fn draw_prediction<F>(mut source: F, max_rounds: u32) -> Result<Prediction>
where
    F: FnMut(u32) -> BitVector,
{
    if max_rounds < NUMBERS_PER_DRAW as u32 {
        return Err(Error::domain(format!(
            "max_rounds must be at least {NUMBERS_PER_DRAW}, got {max_rounds}"
        )));
    }
    let mut numbers = Vec::with_capacity(NUMBERS_PER_DRAW);
    let mut rejected = Vec::new();
    let mut rounds = 0;
    while numbers.len() < NUMBERS_PER_DRAW {
        if rounds == max_rounds {
            return Err(Error::Exhausted {
                rounds,
                collected: numbers,
            });
        }
        let combined = combine_win(&source(rounds))?;
        rounds += 1;
        if combined.valid && !numbers.contains(&combined.value) {
            numbers.push(combined.value);
        } else {
            rejected.push(combined.value);
        }
    }
    Ok(Prediction {
        draw: LotteryDraw::new(numbers)?,
        rounds,
        rejected,
    })
}

/// `C(n, k)` exactly.
pub fn binomial_coefficient(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * u128::from(n - i) / u128::from(i + 1)) as u64
}

/// What the combiner can and cannot produce, from all 1024 bit patterns.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodingRange {
    pub min: u32,
    pub max: u32,
    pub reachable: Vec<u32>,
    pub unreachable_pool_values: Vec<u32>,
    pub zero_patterns: usize,
    /// Patterns producing each value 0..=max.
    pub multiplicity: Vec<usize>,
}

pub fn enumerate_range() -> EncodingRange {
    let mut multiplicity = vec![0usize; (31 + 15 + 1) + 1];
    for pattern in 0..(1u64 << BITS_PER_NUMBER) {
        let bits = BitVector::from_value(pattern, BITS_PER_NUMBER).expect("10-bit pattern");
        let value = combine_win(&bits).expect("10 bits").value;
        multiplicity[value as usize] += 1;
    }
    let reachable: Vec<u32> = (0..multiplicity.len() as u32)
        .filter(|&v| multiplicity[v as usize] > 0)
        .collect();
    let unreachable_pool_values = (1..=POOL_MAX).filter(|v| !reachable.contains(v)).collect();
    EncodingRange {
        min: *reachable.first().expect("non-empty"),
        max: *reachable.last().expect("non-empty"),
        zero_patterns: multiplicity[0],
        reachable,
        unreachable_pool_values,
        multiplicity,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthPool {
    /// The true draw is uniform over 6-subsets of 1..=49.
    Full,
    /// The true draw is uniform over 6-subsets of the encodable 1..=47.
    Reachable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub p_bit: f64,
    pub trials: u64,
    pub successes: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
    pub truth_pool: TruthPool,
}

/// Simulates the whole prediction procedure against uniformly drawn truths.
///
/// For each of the six true numbers in turn, the ten nets emit the canonical
/// bits of that number, each flipped independently with probability
/// `1 − p_bit`, and the rejection rule re-rolls duplicates and invalid values.
/// 48 and 49 have no encoding; their target bits are those of 47, and any
/// truth containing them can never be matched. A trial succeeds when the six
/// predicted numbers equal the true set. Trial `i` uses its own stream
/// seeded by `derive_seed(seed, i)`.
pub fn monte_carlo_jackpot(
    p_bit: f64,
    trials: u64,
    seed: u64,
    pool: TruthPool,
) -> Result<MonteCarloEstimate> {
    check_p_bit(p_bit)?;
    if trials == 0 {
        return Err(Error::domain("need at least one Monte Carlo trial"));
    }
    let pool_max = match pool {
        TruthPool::Full => POOL_MAX,
        TruthPool::Reachable => MAX_ENCODABLE,
    };
    let targets: Vec<BitVector> = (0..=POOL_MAX)
        .map(|t| canonical_bits(t.min(MAX_ENCODABLE)).expect("encodable"))
        .collect();
    let successes = (0..trials)
        .into_par_iter()
        .filter(|&i| jackpot_trial(p_bit, pool_max, &targets, derive_seed(seed, i)))
        .count() as u64;
    let (ci_low, ci_high) = wilson_ci(successes, trials, 0.95)?;
    Ok(MonteCarloEstimate {
        p_bit,
        trials,
        successes,
        estimate: successes as f64 / trials as f64,
        ci_low,
        ci_high,
        seed,
        truth_pool: pool,
    })
}

fn jackpot_trial(p_bit: f64, pool_max: u32, targets: &[BitVector], seed: u64) -> bool {
    let mut rng = SimRng::from_seed(seed);
    let mut pool: Vec<u32> = (1..=pool_max).collect();
    for i in 0..NUMBERS_PER_DRAW {
        let j = i + rng.index(pool.len() - i);
        pool.swap(i, j);
    }
    let truth = &pool[..NUMBERS_PER_DRAW];

    let mut predicted: Vec<u32> = Vec::with_capacity(NUMBERS_PER_DRAW);
    let mut rounds = 0;
    while predicted.len() < NUMBERS_PER_DRAW {
        if rounds == DEFAULT_MAX_ROUNDS {
            return false;
        }
        rounds += 1;
        let target = &targets[truth[predicted.len()] as usize];
        let noisy: Vec<u8> = target
            .bits()
            .iter()
            .map(|&b| if rng.unit_f64() < p_bit { b } else { 1 - b })
            .collect();
        let combined = combine_win(&BitVector(noisy)).expect("ten bits");
        if combined.valid && !predicted.contains(&combined.value) {
            predicted.push(combined.value);
        }
    }
    predicted.sort_unstable();
    let mut truth = truth.to_vec();
    truth.sort_unstable();
    predicted == truth
}

fn check_p_bit(p_bit: f64) -> Result<()> {
    if !(p_bit > 0.0 && p_bit <= 1.0) {
        return Err(Error::domain(format!(
            "per-bit accuracy must lie in (0, 1], got {p_bit}"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityReport {
    pub p_bit: f64,
    /// `p^5 · p^4 · p = p^10`: all ten bits of ONE number correct.
    pub p_win_claimed: f64,
    pub combinations: u64,
    /// `1 / C(49, 6)`.
    pub p_chance: f64,
    /// `p^60`: all bits of all six numbers correct, the per-ticket reading.
    pub p_all_six_bits: f64,
    pub all_six_below_chance: bool,
    /// Probability that a uniform 6-of-49 draw avoids 48 and 49, i.e. the
    /// best any ten-bit predictor can do.
    pub encodable_draw_probability: f64,
    pub encoding_range: (u32, u32),
    pub unreachable_pool_values: Vec<u32>,
    pub zero_patterns: usize,
    pub findings: Vec<String>,
    pub monte_carlo: Option<MonteCarloEstimate>,
}

pub fn probability_report(p_bit: f64) -> Result<ProbabilityReport> {
    check_p_bit(p_bit)?;
    let p_win_claimed = p_bit.powi(5) * p_bit.powi(4) * p_bit;
    let combinations = binomial_coefficient(u64::from(POOL_MAX), NUMBERS_PER_DRAW as u64);
    let p_chance = 1.0 / combinations as f64;
    let p_all_six_bits = p_win_claimed.powi(NUMBERS_PER_DRAW as i32);
    let encodable = binomial_coefficient(u64::from(MAX_ENCODABLE), NUMBERS_PER_DRAW as u64);
    let range = enumerate_range();

    let mut findings = vec![
        format!(
            "p^10 = {p_win_claimed:.8} is the chance that the ten bits of ONE number are right, not the jackpot"
        ),
        format!(
            "all six numbers need all 60 bits right: p^60 = {p_all_six_bits:.6e}{}",
            if p_all_six_bits < p_chance {
                format!(", which is BELOW the uniform-ticket chance {p_chance:.6e}")
            } else {
                String::new()
            }
        ),
        format!(
            "the combiner only reaches {}..={}; pool values {:?} can never be predicted",
            range.min, range.max, range.unreachable_pool_values
        ),
        format!(
            "so even perfect bits win at most {:.6} of draws (C(47,6)/C(49,6))",
            encodable as f64 / combinations as f64
        ),
        format!(
            "0 is produced by {} pattern and is not in the pool",
            range.zero_patterns
        ),
    ];
    if p_bit < 1.0 {
        findings.push(
            "bit errors are not uniform over numbers: a wrong bit in <b1..b5> shifts the value by up to 16".into(),
        );
    }

    Ok(ProbabilityReport {
        p_bit,
        p_win_claimed,
        combinations,
        p_chance,
        p_all_six_bits,
        all_six_below_chance: p_all_six_bits < p_chance,
        encodable_draw_probability: encodable as f64 / combinations as f64,
        encoding_range: (range.min, range.max),
        unreachable_pool_values: range.unreachable_pool_values,
        zero_patterns: range.zero_patterns,
        findings,
        monte_carlo: None,
    })
}

impl ProbabilityReport {
    /// Text block with the claimed figures next to the recomputed ones.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("per-bit accuracy p            {}\n", self.p_bit));
        out.push_str(&format!(
            "p_win  = p^10                 {:.8}   (claimed {:.8})\n",
            self.p_win_claimed,
            claimed::P_WIN
        ));
        out.push_str(&format!(
            "C(49,6)                       {}   (claimed {})\n",
            self.combinations,
            claimed::COMBINATIONS
        ));
        out.push_str(&format!(
            "p_chance = 1/C(49,6)          {:.5e}   (claimed {:.5e})\n",
            self.p_chance,
            claimed::P_CHANCE
        ));
        out.push_str(&format!(
            "per-number reading: p^10      {:.8}\n",
            self.p_win_claimed
        ));
        out.push_str(&format!(
            "per-ticket reading: p^60      {:.6e}   {} p_chance\n",
            self.p_all_six_bits,
            if self.all_six_below_chance { "<" } else { ">=" }
        ));
        out.push_str(&format!(
            "encoding range                [{}, {}], unreachable {:?}\n",
            self.encoding_range.0, self.encoding_range.1, self.unreachable_pool_values
        ));
        out.push_str(&format!(
            "best possible jackpot rate    {:.6}\n",
            self.encodable_draw_probability
        ));
        if let Some(mc) = &self.monte_carlo {
            out.push_str(&format!(
                "monte carlo ({:?} pool)       {}/{} = {:.6e}, 95% CI [{:.3e}, {:.3e}]\n",
                mc.truth_pool, mc.successes, mc.trials, mc.estimate, mc.ci_low, mc.ci_high
            ));
        }
        out.push_str("findings:\n");
        for f in &self.findings {
            out.push_str(&format!("  - {f}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bv(bits: &[u8]) -> BitVector {
        BitVector::new(bits.to_vec()).unwrap()
    }

    #[test]
    fn encode_examples() {
        assert_eq!(encode_bits(&bv(&[1, 0, 1])).unwrap(), 5);
        assert_eq!(encode_bits(&bv(&[0, 0, 0, 0, 0])).unwrap(), 0);
        assert_eq!(encode_bits(&bv(&[1, 1, 1, 1, 1])).unwrap(), 31);
        assert!(BitVector::new(vec![]).is_err());
        assert!(BitVector::new(vec![0, 2]).is_err());
        assert!(encode_bits(&bv(&[1; 65])).is_err());
    }

    #[test]
    fn combine_examples() {
        assert_eq!(
            combine_win(&bv(&[1; 10])).unwrap(),
            Combined {
                value: 47,
                valid: true
            }
        );
        assert_eq!(
            combine_win(&bv(&[0; 10])).unwrap(),
            Combined {
                value: 0,
                valid: false
            }
        );
        assert_eq!(
            combine_win(&bv(&[1, 0, 0, 0, 0, 1, 0, 0, 0, 1]))
                .unwrap()
                .value,
            25
        );
        assert!(combine_win(&bv(&[1; 9])).is_err());
    }

    #[test]
    fn decompose_examples() {
        assert_eq!(decompose_number(47).unwrap(), (31, 15, 1));
        assert_eq!(decompose_number(0).unwrap(), (0, 0, 0));
        assert_eq!(decompose_number(17).unwrap(), (17, 0, 0));
        assert!(matches!(
            decompose_number(49),
            Err(Error::Unrepresentable(49))
        ));
        assert!(matches!(
            decompose_number(48),
            Err(Error::Unrepresentable(48))
        ));
    }

    #[test]
    fn draw_without_rejections() {
        let values = [3u32, 17, 47, 22, 9, 31];
        let p = draw_prediction(|r| canonical_bits(values[r as usize % 6]).unwrap(), 100).unwrap();
        assert_eq!(p.draw.numbers(), &values);
        assert_eq!(p.rounds, 6);
        assert!(p.rejected.is_empty());
    }

    #[test]
    fn draw_with_one_duplicate() {
        let values = [3u32, 3, 17, 47, 22, 9, 31];
        let p = draw_prediction(|r| canonical_bits(values[r as usize]).unwrap(), 100).unwrap();
        assert_eq!(p.rounds, 7);
        assert_eq!(p.rejected, vec![3]);
        assert_eq!(p.draw.sorted(), vec![3, 9, 17, 22, 31, 47]);
    }

    #[test]
    fn zero_is_rejected_like_a_duplicate() {
        let values = [0u32, 1, 2, 3, 4, 5, 6];
        let p = draw_prediction(|r| canonical_bits(values[r as usize]).unwrap(), 10).unwrap();
        assert_eq!(p.rejected, vec![0]);
        assert_eq!(p.rounds, 7);
    }

    #[test]
    fn stuck_source_exhausts() {
        let err = draw_prediction(|_| canonical_bits(12).unwrap(), 50).unwrap_err();
        match err {
            Error::Exhausted { rounds, collected } => {
                assert_eq!(rounds, 50);
                assert_eq!(collected, vec![12]);
            }
            other => panic!("unexpected {other}"),
        }
        assert!(draw_prediction(|_| canonical_bits(12).unwrap(), 5).is_err());
    }

    #[test]
    fn draw_validation() {
        assert!(LotteryDraw::new(vec![1, 2, 3, 4, 5, 6]).is_ok());
        assert!(LotteryDraw::new(vec![1, 2, 3, 4, 5, 5]).is_err());
        assert!(LotteryDraw::new(vec![1, 2, 3, 4, 5, 50]).is_err());
        assert!(LotteryDraw::new(vec![1, 2, 3]).is_err());
    }

    #[test]
    fn binomial_coefficients() {
        assert_eq!(binomial_coefficient(49, 6), 13_983_816);
        assert_eq!(binomial_coefficient(47, 6), 10_737_573);
        assert_eq!(binomial_coefficient(5, 7), 0);
    }

    #[test]
    fn report_reproduces_printed_arithmetic() {
        let r = probability_report(0.7175).unwrap();
        assert!((r.p_win_claimed - 0.036_159_22).abs() < 1e-8);
        assert!((r.p_chance - 7.151_12e-8).abs() < 1e-13);
        assert!(r.all_six_below_chance);
        assert!((r.p_all_six_bits - 2.235e-9).abs() < 1e-12);
        assert_eq!(r.unreachable_pool_values, vec![48, 49]);
        let text = r.to_text();
        assert!(text.contains("0.03615922"));
        assert!(text.contains("7.15112e-8"));
        assert!(probability_report(0.0).is_err());
        assert!(probability_report(1.01).is_err());
    }

    #[test]
    fn perfect_bits_hit_every_encodable_draw() {
        let mc = monte_carlo_jackpot(1.0, 1000, 3, TruthPool::Reachable).unwrap();
        assert_eq!(mc.estimate, 1.0);
        let full = monte_carlo_jackpot(1.0, 4000, 3, TruthPool::Full).unwrap();
        // C(47,6)/C(49,6) = 0.76786; the 95% CI must cover it.
        assert!(
            full.ci_low < 0.767_857 && 0.767_857 < full.ci_high,
            "{full:?}"
        );
    }

    #[test]
    fn monte_carlo_is_seeded() {
        let a = monte_carlo_jackpot(0.95, 500, 11, TruthPool::Full).unwrap();
        let b = monte_carlo_jackpot(0.95, 500, 11, TruthPool::Full).unwrap();
        assert_eq!(a, b);
        assert!(monte_carlo_jackpot(0.95, 0, 11, TruthPool::Full).is_err());
    }
}
