//! Genetic search over the SVM regularization `C` and kernel width `δ`.
//!
//! A candidate is a 20-bit chromosome: the first ten bits (MSB first) encode
//! `C`, the last ten encode `δ`, each mapped linearly onto its search
//! interval. Each generation is scored by the misclassification rate of an
//! SVM trained at the decoded parameters, sorted, and bred by roulette
//! selection with elitism, single-point crossover and bitwise mutation.

use std::cell::RefCell;
use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::svm::{self, Gram, PreparedData, Sample, TrainOptions};

pub const GENE_BITS: u32 = 10;
pub const CHROMOSOME_BITS: u32 = 2 * GENE_BITS;
const GENE_MAX: u32 = (1 << GENE_BITS) - 1;
const CHROMOSOME_MASK: u32 = (1 << CHROMOSOME_BITS) - 1;

/// Twenty binary genes packed into the low bits of a `u32`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Chromosome(u32);

impl Chromosome {
    pub fn from_bits(bits: u32) -> Result<Self> {
        if bits & !CHROMOSOME_MASK != 0 {
            return Err(Error::domain(format!(
                "chromosome {bits:#x} has more than {CHROMOSOME_BITS} bits"
            )));
        }
        Ok(Self(bits))
    }

    pub fn from_genes(c_gene: u32, width_gene: u32) -> Result<Self> {
        if c_gene > GENE_MAX || width_gene > GENE_MAX {
            return Err(Error::domain("gene value exceeds 10 bits"));
        }
        Ok(Self((c_gene << GENE_BITS) | width_gene))
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self(rng.random::<u32>() & CHROMOSOME_MASK)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn c_gene(self) -> u32 {
        self.0 >> GENE_BITS
    }

    pub fn width_gene(self) -> u32 {
        self.0 & GENE_MAX
    }

    /// Gene at position `i`, counted from the first `C` bit.
    pub fn gene(self, i: u32) -> bool {
        debug_assert!(i < CHROMOSOME_BITS);
        (self.0 >> (CHROMOSOME_BITS - 1 - i)) & 1 == 1
    }
}

/// Closed search intervals for `C` and `δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub c: [f64; 2],
    pub width: [f64; 2],
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            c: [0.1, 15.0],
            width: [0.1, 30.0],
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        for (name, [lo, hi]) in [("C", self.c), ("width", self.width)] {
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return Err(Error::config(format!(
                    "{name} search interval [{lo}, {hi}] must be positive and ordered"
                )));
            }
        }
        Ok(())
    }

    /// Linear map of each 10-bit gene onto its interval.
    pub fn decode(&self, chromosome: Chromosome) -> (f64, f64) {
        let map = |v: u32, [lo, hi]: [f64; 2]| lo + f64::from(v) / f64::from(GENE_MAX) * (hi - lo);
        (
            map(chromosome.c_gene(), self.c),
            map(chromosome.width_gene(), self.width),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub pop_size: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub max_generations: usize,
    /// Stop once the best misclassification rate falls below this.
    pub mse_stop: f64,
    /// Stratified validation folds used for fitness; 1 means a single 75/25 split.
    pub folds: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            pop_size: 20,
            crossover_prob: 0.6,
            mutation_prob: 0.1,
            max_generations: 300,
            mse_stop: 0.01,
            folds: 4,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pop_size < 2 {
            return Err(Error::config(
                "GA population must hold at least 2 chromosomes",
            ));
        }
        for (name, p) in [
            ("crossover_prob", self.crossover_prob),
            ("mutation_prob", self.mutation_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if self.max_generations == 0 {
            return Err(Error::config("max_generations must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.mse_stop) {
            return Err(Error::config("mse_stop must lie in [0, 1]"));
        }
        if self.folds == 0 {
            return Err(Error::config("folds must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaResult {
    pub best_c: f64,
    pub best_width: f64,
    pub best_mse: f64,
    pub best_chromosome: Chromosome,
    pub generations_run: usize,
    /// Best misclassification rate of each generation's population.
    pub history: Vec<f64>,
    /// Distinct chromosomes trained and scored.
    pub evaluations: usize,
}

#[derive(Debug, Clone)]
struct Fold {
    fit: PreparedData,
    validate: Vec<Sample>,
}

impl Fold {
    fn new(fit: Vec<Sample>, validate: Vec<Sample>, standardize: bool) -> Self {
        Self {
            fit: PreparedData::new(&fit, standardize),
            validate,
        }
    }
}

/// Kernel matrices kept per fitness; one per distinct width gene suffices.
const GRAM_CACHE_LIMIT: usize = 1 << GENE_BITS;

/// Datasets on which a chromosome is scored.
#[derive(Debug, Clone)]
pub struct Fitness {
    folds: Vec<Fold>,
    options: TrainOptions,
    grams: RefCell<HashMap<u64, Vec<Gram>>>,
}

impl Fitness {
    /// Train on `fit`, score on `validate`.
    pub fn holdout(fit: Vec<Sample>, validate: Vec<Sample>) -> Result<Self> {
        if validate.is_empty() {
            return Err(Error::domain("validation set is empty"));
        }
        let options = TrainOptions::default();
        Ok(Self {
            folds: vec![Fold::new(fit, validate, options.standardize)],
            options,
            grams: RefCell::default(),
        })
    }

    /// Stratified folds over `data`. With `k = 1` a single split holds out a
    /// quarter of each class; otherwise each fold holds out one `k`-th.
    pub fn stratified<R: Rng + ?Sized>(data: &[Sample], k: usize, rng: &mut R) -> Result<Self> {
        if k == 0 {
            return Err(Error::domain("fold count must be at least 1"));
        }
        let buckets = if k == 1 { 4 } else { k };
        let mut assignment = vec![0usize; data.len()];
        let mut next = 0usize;
        for class in [1.0, -1.0] {
            let mut idx: Vec<usize> = (0..data.len()).filter(|&i| data[i].y == class).collect();
            idx.shuffle(rng);
            for i in idx {
                assignment[i] = next % buckets;
                next += 1;
            }
        }
        let options = TrainOptions::default();
        let folds = (0..k)
            .map(|f| {
                let (validate, fit): (Vec<_>, Vec<_>) =
                    data.iter().zip(&assignment).partition(|(_, &a)| a == f);
                Fold::new(
                    fit.into_iter().map(|(s, _)| *s).collect(),
                    validate.into_iter().map(|(s, _)| *s).collect(),
                    options.standardize,
                )
            })
            .collect::<Vec<_>>();
        if folds.iter().any(|f| f.validate.is_empty()) {
            return Err(Error::domain(format!(
                "{} samples cannot fill {k} folds",
                data.len()
            )));
        }
        Ok(Self {
            folds,
            options,
            grams: RefCell::default(),
        })
    }

    pub fn with_options(mut self, options: TrainOptions) -> Self {
        if options.standardize != self.options.standardize {
            for fold in &mut self.folds {
                fold.fit = PreparedData::new(fold.fit.samples(), options.standardize);
            }
            self.grams.get_mut().clear();
        }
        self.options = options;
        self
    }

    /// Misclassification rate averaged over folds at `(c, width)`.
    pub fn score(&self, c: f64, width: f64) -> Result<f64> {
        let key = width.to_bits();
        let mut grams = self.grams.borrow_mut();
        let fresh;
        let fold_grams = match grams.get(&key) {
            Some(g) => g,
            None => {
                fresh = self
                    .folds
                    .iter()
                    .map(|f| f.fit.gram(width))
                    .collect::<Result<Vec<_>>>()?;
                if grams.len() < GRAM_CACHE_LIMIT {
                    grams.entry(key).or_insert(fresh)
                } else {
                    &fresh
                }
            }
        };
        let mut total = 0.0;
        for (fold, gram) in self.folds.iter().zip(fold_grams) {
            let model = svm::train_prepared(&fold.fit, gram, c, self.options)?;
            total += 1.0 - model.accuracy(&fold.validate)?;
        }
        Ok(total / self.folds.len() as f64)
    }
}

/// Misclassification rate (`1 − accuracy`) of the decoded parameters.
pub fn evaluate(chromosome: Chromosome, space: &SearchSpace, fitness: &Fitness) -> Result<f64> {
    let (c, width) = space.decode(chromosome);
    fitness.score(c, width)
}

/// Index of the lowest error; the earliest wins ties.
fn best_index(population: &[(Chromosome, f64)]) -> usize {
    let mut best = 0;
    for (i, (_, mse)) in population.iter().enumerate() {
        if *mse < population[best].1 {
            best = i;
        }
    }
    best
}

/// Roulette selection on fitness `1 − mse`. The first parent is always the
/// best chromosome of the population.
pub fn select<R: Rng + ?Sized>(population: &[(Chromosome, f64)], rng: &mut R) -> Vec<Chromosome> {
    if population.is_empty() {
        return Vec::new();
    }
    let weights: Vec<f64> = population
        .iter()
        .map(|(_, mse)| (1.0 - mse).max(0.0))
        .collect();
    let total: f64 = weights.iter().sum();
    let mut parents = Vec::with_capacity(population.len());
    parents.push(population[best_index(population)].0);
    while parents.len() < population.len() {
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = population.len() - 1;
            for (i, w) in weights.iter().enumerate() {
                if target < *w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..population.len())
        };
        parents.push(population[pick].0);
    }
    parents
}

/// Single-point crossover with probability `p_x`, cut uniform in `[1, 19]`.
pub fn crossover<R: Rng + ?Sized>(
    a: Chromosome,
    b: Chromosome,
    p_x: f64,
    rng: &mut R,
) -> (Chromosome, Chromosome) {
    if rng.random::<f64>() >= p_x {
        return (a, b);
    }
    let cut = rng.random_range(1..CHROMOSOME_BITS);
    crossover_at(a, b, cut)
}

/// Children take genes `[0, cut)` from one parent and `[cut, 20)` from the other.
pub fn crossover_at(a: Chromosome, b: Chromosome, cut: u32) -> (Chromosome, Chromosome) {
    let tail = (1u32 << (CHROMOSOME_BITS - cut)) - 1;
    (
        Chromosome((a.0 & !tail) | (b.0 & tail)),
        Chromosome((b.0 & !tail) | (a.0 & tail)),
    )
}

/// Flips each gene independently with probability `p_f`.
pub fn mutate<R: Rng + ?Sized>(chromosome: Chromosome, p_f: f64, rng: &mut R) -> Chromosome {
    let mut bits = chromosome.0;
    for i in 0..CHROMOSOME_BITS {
        if rng.random::<f64>() < p_f {
            bits ^= 1 << i;
        }
    }
    Chromosome(bits)
}

/// Runs the generational loop and returns the best parameters seen.
pub fn optimize<R: Rng + ?Sized>(
    fitness: &Fitness,
    space: &SearchSpace,
    config: &GaConfig,
    rng: &mut R,
) -> Result<GaResult> {
    config.validate()?;
    space.validate()?;
    let mut cache: HashMap<Chromosome, f64> = HashMap::new();
    let mut population: Vec<Chromosome> = (0..config.pop_size)
        .map(|_| Chromosome::random(rng))
        .collect();
    let mut best: Option<(Chromosome, f64)> = None;
    let mut history = Vec::new();

    for generation in 1..=config.max_generations {
        let mut scored = Vec::with_capacity(population.len());
        for &chromosome in &population {
            let mse = match cache.get(&chromosome) {
                Some(&mse) => mse,
                None => {
                    let mse = evaluate(chromosome, space, fitness)?;
                    cache.insert(chromosome, mse);
                    mse
                }
            };
            scored.push((chromosome, mse));
        }
        scored.sort_by(|a, b| a.1.total_cmp(&b.1));

        let generation_best = scored[0];
        if best.is_none_or(|(_, mse)| generation_best.1 < mse) {
            best = Some(generation_best);
        }
        history.push(generation_best.1);
        let best_mse = best.map_or(f64::INFINITY, |(_, m)| m);
        if best_mse < config.mse_stop || generation == config.max_generations {
            break;
        }

        let parents = select(&scored, rng);
        let mut next = Vec::with_capacity(config.pop_size);
        next.push(parents[0]);
        let mut k = 1;
        while next.len() < config.pop_size {
            let a = parents[k % parents.len()];
            let b = parents[(k + 1) % parents.len()];
            k += 2;
            let (c1, c2) = crossover(a, b, config.crossover_prob, rng);
            next.push(mutate(c1, config.mutation_prob, rng));
            if next.len() < config.pop_size {
                next.push(mutate(c2, config.mutation_prob, rng));
            }
        }
        population = next;
    }

    let (chromosome, best_mse) = best.expect("at least one generation runs");
    let (best_c, best_width) = space.decode(chromosome);
    Ok(GaResult {
        best_c,
        best_width,
        best_mse,
        best_chromosome: chromosome,
        generations_run: history.len(),
        history,
        evaluations: cache.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    use crate::rng::RngStream;

    fn rng(id: u64) -> crate::rng::StreamRng {
        RngStream::new(99, id).generator()
    }

    fn noisy_data(seed: u64, n: usize) -> Vec<Sample> {
        let mut g = rng(1000 + seed);
        (0..n)
            .map(|k| {
                let y = if k % 2 == 0 { 1.0 } else { -1.0 };
                let x = [y * 0.6 + g.random::<f64>() * 2.0 - 1.0, g.random::<f64>()];
                Sample { x, y }
            })
            .collect()
    }

    #[test]
    fn decode_bounds_and_midpoint() {
        let space = SearchSpace::default();
        assert_eq!(space.decode(Chromosome::from_bits(0).unwrap()), (0.1, 0.1));
        let (c, w) = space.decode(Chromosome::from_bits(CHROMOSOME_MASK).unwrap());
        assert_eq!((c, w), (15.0, 30.0));
        let (c, w) = space.decode(Chromosome::from_genes(512, 0).unwrap());
        assert_relative_eq!(c, 0.1 + 512.0 / 1023.0 * 14.9, max_relative = 1e-15);
        assert_relative_eq!(c, 7.557, epsilon = 1e-3);
        assert_eq!(w, 0.1);
        assert!(Chromosome::from_bits(1 << 20).is_err());
    }

    #[test]
    fn gene_positions() {
        let c = Chromosome::from_genes(0b10_0000_0000, 1).unwrap();
        assert!(c.gene(0));
        assert!(c.gene(19));
        assert!(!(1..19).any(|i| c.gene(i)));
    }

    #[test]
    fn crossover_at_gene_boundary_swaps_widths() {
        let a = Chromosome::from_genes(0x155, 0x0F0).unwrap();
        let b = Chromosome::from_genes(0x2AA, 0x30F).unwrap();
        let (x, y) = crossover_at(a, b, 10);
        assert_eq!((x.c_gene(), x.width_gene()), (0x155, 0x30F));
        assert_eq!((y.c_gene(), y.width_gene()), (0x2AA, 0x0F0));
        for cut in 1..20 {
            assert_eq!(crossover_at(a, a, cut), (a, a));
        }
    }

    #[test]
    fn crossover_probability_edges() {
        let mut g = rng(2);
        let a = Chromosome::from_bits(0).unwrap();
        let b = Chromosome::from_bits(CHROMOSOME_MASK).unwrap();
        for _ in 0..100 {
            assert_eq!(crossover(a, b, 0.0, &mut g), (a, b));
            let (x, y) = crossover(a, b, 1.0, &mut g);
            assert_ne!(x, a);
            assert_eq!(x.bits() ^ y.bits(), CHROMOSOME_MASK);
        }
    }

    #[test]
    fn mutation_edges_and_rate() {
        let mut g = rng(3);
        let c = Chromosome::from_bits(0xABCDE).unwrap();
        assert_eq!(mutate(c, 0.0, &mut g), c);
        assert_eq!(mutate(c, 1.0, &mut g).bits(), !c.bits() & CHROMOSOME_MASK);
        let draws = 5_000; // 10⁵ gene draws
        let flips: u32 = (0..draws)
            .map(|_| (mutate(c, 0.1, &mut g).bits() ^ c.bits()).count_ones())
            .sum();
        let rate = f64::from(flips) / f64::from(draws * CHROMOSOME_BITS);
        assert_relative_eq!(rate, 0.1, max_relative = 0.02);
    }

    #[test]
    fn selection_keeps_elite_and_is_uniform_on_ties() {
        let mut g = rng(4);
        let pop: Vec<(Chromosome, f64)> = (0..10)
            .map(|i| {
                (
                    Chromosome::from_bits(i).unwrap(),
                    if i == 7 { 0.0 } else { 1.0 },
                )
            })
            .collect();
        for _ in 0..50 {
            let parents = select(&pop, &mut g);
            assert_eq!(parents.len(), 10);
            assert_eq!(parents[0].bits(), 7);
        }

        let flat: Vec<(Chromosome, f64)> = (0..4)
            .map(|i| (Chromosome::from_bits(i).unwrap(), 0.3))
            .collect();
        let mut counts = [0usize; 4];
        for _ in 0..10_000 {
            for p in &select(&flat, &mut g)[1..] {
                counts[p.bits() as usize] += 1;
            }
        }
        let total: usize = counts.iter().sum();
        for c in counts {
            assert_relative_eq!(c as f64 / total as f64, 0.25, epsilon = 0.01);
        }
    }

    #[test]
    fn selection_is_reproducible() {
        let pop: Vec<(Chromosome, f64)> = (0..8)
            .map(|i| (Chromosome::from_bits(i * 3).unwrap(), 0.1 * i as f64))
            .collect();
        assert_eq!(select(&pop, &mut rng(5)), select(&pop, &mut rng(5)));
    }

    #[test]
    fn evaluate_matches_accuracy_complement() {
        let data = noisy_data(1, 40);
        let (fit, validate) = data.split_at(30);
        let fitness = Fitness::holdout(fit.to_vec(), validate.to_vec()).unwrap();
        let chromosome = Chromosome::from_genes(100, 50).unwrap();
        let mse = evaluate(chromosome, &SearchSpace::default(), &fitness).unwrap();
        let (c, w) = SearchSpace::default().decode(chromosome);
        let model = svm::train(fit, c, w).unwrap();
        assert_eq!(mse, 1.0 - model.accuracy(validate).unwrap());
        assert_eq!(
            mse,
            evaluate(chromosome, &SearchSpace::default(), &fitness).unwrap()
        );
    }

    #[test]
    fn stratified_folds_cover_data_once() {
        let data = noisy_data(2, 40);
        let fitness = Fitness::stratified(&data, 4, &mut rng(6)).unwrap();
        assert_eq!(fitness.folds.len(), 4);
        let held: usize = fitness.folds.iter().map(|f| f.validate.len()).sum();
        assert_eq!(held, 40);
        for f in &fitness.folds {
            assert_eq!(f.fit.samples().len() + f.validate.len(), 40);
            assert!(f.validate.iter().any(|s| s.y > 0.0) && f.validate.iter().any(|s| s.y < 0.0));
        }
        let single = Fitness::stratified(&data, 1, &mut rng(6)).unwrap();
        assert_eq!(single.folds[0].validate.len(), 10);
    }

    #[test]
    fn separable_data_stops_in_first_generation() {
        let data: Vec<Sample> = (0..40)
            .map(|k| {
                let y = if k % 2 == 0 { 1.0 } else { -1.0 };
                Sample {
                    x: [y * 5.0 + (k as f64) * 0.01, 0.0],
                    y,
                }
            })
            .collect();
        let fitness = Fitness::stratified(&data, 4, &mut rng(7)).unwrap();
        let result = optimize(
            &fitness,
            &SearchSpace::default(),
            &GaConfig::default(),
            &mut rng(8),
        )
        .unwrap();
        assert_eq!(result.generations_run, 1);
        assert_eq!(result.best_mse, 0.0);
    }

    #[test]
    fn single_generation_budget() {
        let data = noisy_data(3, 40);
        let fitness = Fitness::stratified(&data, 1, &mut rng(9)).unwrap();
        let config = GaConfig {
            max_generations: 1,
            mse_stop: 0.0,
            ..GaConfig::default()
        };
        let result = optimize(&fitness, &SearchSpace::default(), &config, &mut rng(10)).unwrap();
        assert_eq!(result.generations_run, 1);
        assert_eq!(result.history.len(), 1);
        assert!(result.evaluations <= 20);
    }

    #[test]
    fn history_is_monotone_and_reproducible() {
        let data = noisy_data(4, 40);
        let fitness = Fitness::stratified(&data, 4, &mut rng(11)).unwrap();
        let config = GaConfig {
            max_generations: 40,
            ..GaConfig::default()
        };
        let a = optimize(&fitness, &SearchSpace::default(), &config, &mut rng(12)).unwrap();
        let b = optimize(&fitness, &SearchSpace::default(), &config, &mut rng(12)).unwrap();
        assert_eq!(a, b);
        for w in a.history.windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert_eq!(*a.history.last().unwrap(), a.best_mse);
        assert!((0.0..=1.0).contains(&a.best_mse));
        assert!(a.generations_run <= 40);
    }

    #[test]
    fn config_validation() {
        assert!(GaConfig {
            crossover_prob: 1.5,
            ..GaConfig::default()
        }
        .validate()
        .is_err());
        assert!(GaConfig {
            pop_size: 1,
            ..GaConfig::default()
        }
        .validate()
        .is_err());
        assert!(GaConfig {
            max_generations: 0,
            ..GaConfig::default()
        }
        .validate()
        .is_err());
        assert!(GaConfig::default().validate().is_ok());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn decoded_values_stay_in_bounds(bits in 0u32..(1 << 20)) {
                let (c, w) = SearchSpace::default().decode(Chromosome::from_bits(bits).unwrap());
                prop_assert!((0.1..=15.0).contains(&c));
                prop_assert!((0.1..=30.0).contains(&w));
            }

            #[test]
            fn crossover_preserves_gene_multiset(a in 0u32..(1 << 20), b in 0u32..(1 << 20), cut in 1u32..20) {
                let (x, y) = crossover_at(Chromosome(a), Chromosome(b), cut);
                for i in 0..20 {
                    let parents = (Chromosome(a).gene(i), Chromosome(b).gene(i));
                    let children = (x.gene(i), y.gene(i));
                    prop_assert!(children == parents || children == (parents.1, parents.0));
                }
            }
        }
    }
}
