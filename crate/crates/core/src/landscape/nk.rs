use rand::seq::index;
use rand::Rng;

use super::{check_shape, enumerate_sequences, Landscape, LandscapeError};
use crate::rng::seeded;
use crate::scalar::Scalar;
use crate::sequence::{Alphabet, SequenceState};

/// Kauffman NK landscape over an arbitrary alphabet.
///
/// Each position `i` has `k` distinct random neighbours (never itself) and a
/// table of `A^(k+1)` contributions drawn uniformly from `[0, 1)`. Fitness is
/// the mean contribution. Generation order from the seeded stream: for each
/// position in order, its neighbour set, then its table.
#[derive(Debug, Clone)]
pub struct NkLandscape<T> {
    alphabet: Alphabet,
    k: usize,
    seed: u64,
    neighbors: Vec<Vec<usize>>,
    tables: Vec<Vec<T>>,
}

impl<T: Scalar> NkLandscape<T> {
    pub fn new(alphabet: &Alphabet, n: usize, k: usize, seed: u64) -> Result<Self, LandscapeError> {
        if n == 0 {
            return Err(LandscapeError::Invalid("NK landscape needs N ≥ 1".into()));
        }
        if k >= n {
            return Err(LandscapeError::Invalid(format!(
                "NK landscape needs K < N (K = {k}, N = {n})"
            )));
        }
        let entries = alphabet
            .size()
            .checked_pow(k as u32 + 1)
            .filter(|&e| e <= 1 << 26)
            .ok_or_else(|| {
                LandscapeError::Invalid(format!("A^(K+1) table too large for K = {k}"))
            })?;
        let mut rng = seeded(seed);
        let below_one = T::one() - T::epsilon();
        let mut neighbors = Vec::with_capacity(n);
        let mut tables = Vec::with_capacity(n);
        for i in 0..n {
            let picks = index::sample(&mut rng, n - 1, k)
                .into_iter()
                .map(|j| if j >= i { j + 1 } else { j })
                .collect();
            neighbors.push(picks);
            let table = (0..entries)
                .map(|_| T::lit(rng.random::<f64>()).min(below_one))
                .collect();
            tables.push(table);
        }
        Ok(Self {
            alphabet: alphabet.clone(),
            k,
            seed,
            neighbors,
            tables,
        })
    }

    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn neighbors(&self, position: usize) -> &[usize] {
        &self.neighbors[position]
    }

    /// Contribution table of one position; entries are indexed by the
    /// position's residue as the most significant base-`A` digit followed by
    /// its neighbours' residues in order.
    pub fn table(&self, position: usize) -> &[T] {
        &self.tables[position]
    }

    fn contribution(&self, residues: &[u8], position: usize) -> T {
        let a = self.alphabet.size();
        let mut idx = usize::from(residues[position]);
        for &j in &self.neighbors[position] {
            idx = idx * a + usize::from(residues[j]);
        }
        self.tables[position][idx]
    }

    /// Exact global maximum by enumerating all `A^N` sequences.
    pub fn brute_force_optimum(&self) -> Result<(SequenceState, T), LandscapeError> {
        self.brute_force(|cand, best| cand > best)
    }

    /// Exact global minimum by enumeration.
    pub fn brute_force_minimum(&self) -> Result<(SequenceState, T), LandscapeError> {
        self.brute_force(|cand, best| cand < best)
    }

    fn brute_force(
        &self,
        better: impl Fn(T, T) -> bool,
    ) -> Result<(SequenceState, T), LandscapeError> {
        let mut best: Option<(Vec<u8>, T)> = None;
        enumerate_sequences(self.alphabet.size(), self.n(), |residues| {
            let f = self.eval_residues(residues);
            if best.as_ref().map_or(true, |(_, b)| better(f, *b)) {
                best = Some((residues.to_vec(), f));
            }
        })?;
        let (residues, f) = best.expect("at least one sequence enumerated");
        let state = SequenceState::from_indices(&self.alphabet, residues)
            .expect("enumerated residues are in range");
        Ok((state, f))
    }

    fn eval_residues(&self, residues: &[u8]) -> T {
        let total: T = (0..self.n()).map(|i| self.contribution(residues, i)).sum();
        total / T::from_usize_lossy(self.n())
    }
}

impl<T: Scalar> Landscape<T> for NkLandscape<T> {
    fn fitness(&self, state: &SequenceState) -> Result<T, LandscapeError> {
        check_shape(state, &self.alphabet, self.n())?;
        Ok(self.eval_residues(state.residues()))
    }

    fn shape(&self) -> Option<(Alphabet, usize)> {
        Some((self.alphabet.clone(), self.n()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    fn abcd() -> Alphabet {
        Alphabet::new("ACDE").unwrap()
    }

    fn random_state(rng: &mut impl Rng, alphabet: &Alphabet, n: usize) -> SequenceState {
        let residues = (0..n).map(|_| rng.random_range(0..alphabet.size() as u8)).collect();
        SequenceState::from_indices(alphabet, residues).unwrap()
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(NkLandscape::<f64>::new(&abcd(), 4, 4, 0).is_err());
        assert!(NkLandscape::<f64>::new(&abcd(), 0, 0, 0).is_err());
    }

    #[test]
    fn neighbours_are_distinct_and_exclude_self() {
        let nk = NkLandscape::<f64>::new(&abcd(), 10, 4, 3).unwrap();
        for i in 0..10 {
            let nb = nk.neighbors(i);
            assert_eq!(nb.len(), 4);
            assert!(!nb.contains(&i));
            let mut sorted = nb.to_vec();
            sorted.sort_unstable();
            sorted.dedup();
            assert_eq!(sorted.len(), 4);
        }
    }

    #[test]
    fn identical_parameters_are_bit_identical() {
        let a = NkLandscape::<f64>::new(&abcd(), 12, 3, 99).unwrap();
        let b = NkLandscape::<f64>::new(&abcd(), 12, 3, 99).unwrap();
        let mut rng = seeded(5);
        for _ in 0..1000 {
            let s = random_state(&mut rng, &abcd(), 12);
            let (fa, fb) = (a.fitness(&s).unwrap(), b.fitness(&s).unwrap());
            assert_eq!(fa.to_bits(), fb.to_bits());
            assert!((0.0..1.0).contains(&fa));
        }
    }

    #[test]
    fn k_zero_optimum_is_per_position_argmax() {
        for seed in 0..5 {
            let nk = NkLandscape::<f64>::new(&abcd(), 6, 0, seed).unwrap();
            let (best, f) = nk.brute_force_optimum().unwrap();
            let mut construct = Vec::new();
            let mut total = 0.0;
            for i in 0..6 {
                let t = nk.table(i);
                let r = crate::scalar::argmax(t.iter().copied()).unwrap();
                construct.push(r as u8);
                total += t[r];
            }
            assert_eq!(best.residues(), construct.as_slice());
            assert!((f - total / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn single_position_optimum_is_table_max() {
        let nk = NkLandscape::<f64>::new(&abcd(), 1, 0, 11).unwrap();
        let (_, f) = nk.brute_force_optimum().unwrap();
        let max = nk.table(0).iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(f, max);
    }

    #[test]
    fn enumeration_bounds_every_sequence() {
        let nk = NkLandscape::<f64>::new(&abcd(), 6, 2, 7).unwrap();
        let (best, m) = nk.brute_force_optimum().unwrap();
        assert_eq!(nk.fitness(&best).unwrap(), m);
        let mut rng = seeded(1);
        for _ in 0..2000 {
            let s = random_state(&mut rng, &abcd(), 6);
            assert!(nk.fitness(&s).unwrap() <= m);
        }
        let (worst, lo) = nk.brute_force_minimum().unwrap();
        assert_eq!(nk.fitness(&worst).unwrap(), lo);
        assert!(lo < m);
    }

    #[test]
    fn refuses_intractable_enumeration() {
        let nk = NkLandscape::<f64>::new(&Alphabet::protein(), 15, 1, 0).unwrap();
        assert!(matches!(nk.brute_force_optimum(), Err(LandscapeError::TooLarge(_))));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let nk = NkLandscape::<f32>::new(&abcd(), 3, 1, 0).unwrap();
        let s = SequenceState::parse(&abcd(), "AC").unwrap();
        assert!(matches!(nk.fitness(&s), Err(LandscapeError::Shape { .. })));
    }
}
