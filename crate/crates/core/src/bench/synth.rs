use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample_weighted;
use rand::seq::IteratorRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::BenchError;
use crate::corpus::{Corpus, ProjectSnapshot};
use crate::reqparse::LibraryName;

/// First year of every synthetic corpus.
pub const SYNTH_FIRST_YEAR: i32 = 2016;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub n_domains: usize,
    pub libs_per_domain: usize,
    /// Popularity exponent within a pool; 0 gives uniform popularity.
    pub zipf_s: f64,
    pub n_projects: usize,
    pub deps_min: usize,
    pub deps_max: usize,
    pub years: usize,
    /// Chance that a project adds libraries from its domain in a given year.
    pub add_rate: f64,
    /// Chance that a project uses one library from its domain's rare tail.
    pub tail_rate: f64,
    /// Size of the shared pool of popular libraries.
    pub common_libs: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_domains: 8,
            libs_per_domain: 60,
            zipf_s: 1.5,
            n_projects: 2000,
            deps_min: 3,
            deps_max: 12,
            years: 3,
            add_rate: 0.5,
            tail_rate: 0.5,
            common_libs: 12,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::InvalidConfig(m.to_string()));
        if self.n_domains == 0 || self.libs_per_domain == 0 || self.n_projects == 0 || self.years == 0 {
            return bad("domains, libs-per-domain, projects and years must be positive");
        }
        if self.deps_min == 0 || self.deps_min > self.deps_max {
            return bad("dependency counts need 1 <= deps-min <= deps-max");
        }
        if !(self.zipf_s >= 0.0 && self.zipf_s.is_finite()) {
            return bad("zipf exponent must be a finite value >= 0");
        }
        if !(0.0..=1.0).contains(&self.add_rate) || !(0.0..=1.0).contains(&self.tail_rate) {
            return bad("add-rate and tail-rate must lie in [0, 1]");
        }
        Ok(())
    }
}

/// A generated corpus with the domain labels it was planted with.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub corpus: Corpus,
    /// Home domain of every repository.
    pub repo_domains: BTreeMap<String, usize>,
    /// Domain of every library; `None` for the shared popular pool.
    pub library_domains: BTreeMap<LibraryName, Option<usize>>,
}

fn lib(name: String) -> LibraryName {
    name.parse().expect("generated names are canonical")
}

fn zipf(n: usize, s: f64) -> Vec<f64> {
    (0..n).map(|i| ((i + 1) as f64).powf(-s)).collect()
}

/// Draws up to `amount` distinct pool members not yet in `deps`.
fn draw(
    rng: &mut ChaCha8Rng,
    pool: &[LibraryName],
    weights: &[f64],
    deps: &BTreeSet<LibraryName>,
    amount: usize,
) -> Vec<LibraryName> {
    let w = |i: usize| if deps.contains(&pool[i]) { 0.0 } else { weights[i] };
    let mut picked: Vec<usize> = sample_weighted(rng, pool.len(), w, amount)
        .expect("weights are finite and nonnegative")
        .into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| pool[i].clone()).collect()
}

/// Projects with a planted home domain whose dependencies grow over the
/// years with libraries from that domain.
///
/// Each domain has a Zipf-weighted pool of `libs_per_domain` libraries and a
/// uniform tail of `4 × libs_per_domain` rarely used ones. A small shared
/// pool of popular libraries is used across domains.
pub fn synth_corpus(config: &SynthConfig) -> Result<SynthCorpus, BenchError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut library_domains = BTreeMap::new();
    let pools: Vec<Vec<LibraryName>> = (0..config.n_domains)
        .map(|d| (0..config.libs_per_domain).map(|i| lib(format!("dom{d}-lib{i:03}"))).collect())
        .collect();
    let tails: Vec<Vec<LibraryName>> = (0..config.n_domains)
        .map(|d| (0..4 * config.libs_per_domain).map(|i| lib(format!("dom{d}-rare{i:04}"))).collect())
        .collect();
    let common: Vec<LibraryName> = (0..config.common_libs).map(|i| lib(format!("common-{i:02}"))).collect();
    for (d, (pool, tail)) in pools.iter().zip(&tails).enumerate() {
        for l in pool.iter().chain(tail) {
            library_domains.insert(l.clone(), Some(d));
        }
    }
    for l in &common {
        library_domains.insert(l.clone(), None);
    }
    let pool_w = zipf(config.libs_per_domain, config.zipf_s);
    let common_w = zipf(config.common_libs, config.zipf_s);

    let mut snapshots = Vec::with_capacity(config.n_projects * config.years);
    let mut repo_domains = BTreeMap::new();
    for p in 0..config.n_projects {
        let repo = format!("synth/proj-{p:05}");
        let domain = rng.random_range(0..config.n_domains);
        repo_domains.insert(repo.clone(), domain);

        let n = rng.random_range(config.deps_min..=config.deps_max);
        let n_common = rng.random_range(0..=2usize).min(n - 1).min(config.common_libs);
        let use_tail = n >= 2 && rng.random::<f64>() < config.tail_rate;
        let n_domain = n - n_common - usize::from(use_tail);
        let mut deps = BTreeSet::new();
        deps.extend(draw(&mut rng, &common, &common_w, &deps, n_common));
        deps.extend(draw(&mut rng, &pools[domain], &pool_w, &deps, n_domain));
        if use_tail {
            deps.extend(tails[domain].iter().choose(&mut rng).cloned());
        }

        for y in 0..config.years {
            if y > 0 {
                if rng.random::<f64>() < config.add_rate {
                    let m = rng.random_range(1..=3);
                    let added = draw(&mut rng, &pools[domain], &pool_w, &deps, m);
                    deps.extend(added);
                }
                if deps.len() > 1 && rng.random::<f64>() < 0.1 {
                    let gone = deps.iter().choose(&mut rng).cloned().expect("nonempty");
                    deps.remove(&gone);
                }
            }
            let snapshot = ProjectSnapshot::new(repo.clone(), SYNTH_FIRST_YEAR + y as i32, deps.clone())?;
            snapshots.push(snapshot);
        }
    }
    Ok(SynthCorpus {
        corpus: Corpus::new(snapshots)?,
        repo_domains,
        library_domains,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SynthConfig {
        SynthConfig {
            n_projects: 200,
            seed,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = synth_corpus(&small(4)).unwrap();
        let b = synth_corpus(&small(4)).unwrap();
        let c = synth_corpus(&small(5)).unwrap();
        assert_eq!(a.corpus, b.corpus);
        assert_ne!(a.corpus, c.corpus);
    }

    #[test]
    fn shape() {
        let s = synth_corpus(&small(1)).unwrap();
        assert_eq!(s.corpus.len(), 600);
        assert_eq!(s.corpus.years().collect::<Vec<_>>(), vec![2016, 2017, 2018]);
        for snap in s.corpus.snapshots().iter().filter(|x| x.year == 2016) {
            assert!((3..=12).contains(&snap.deps.len()));
            let home = s.repo_domains[&snap.repo];
            assert!(snap.deps.iter().all(|d| s.library_domains[d].is_none_or(|x| x == home)));
        }
    }

    #[test]
    fn single_domain() {
        let s = synth_corpus(&SynthConfig {
            n_domains: 1,
            ..small(2)
        })
        .unwrap();
        assert!(s.repo_domains.values().all(|&d| d == 0));
    }

    #[test]
    fn rejects_bad_ranges() {
        let bad = SynthConfig {
            deps_min: 5,
            deps_max: 4,
            ..SynthConfig::default()
        };
        assert!(matches!(synth_corpus(&bad), Err(BenchError::InvalidConfig(_))));
    }
}
