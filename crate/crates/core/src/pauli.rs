//! Pauli-string operator algebra.
//!
//! A [`PauliSum`] is a canonical, complex-weighted sum of Pauli words: terms
//! are sorted by word, duplicates are merged and coefficients below the drop
//! tolerance are removed. Non-Hermitian Hamiltonians are split into
//! `H = H0 + iV` by [`hermitian_split`].

use core::cmp::Ordering;
use core::fmt;

use nalgebra::DMatrix;

use crate::prelude::*;
use crate::{Error, Result};

/// Largest register a Pauli word can describe.
pub const MAX_QUBITS: usize = 63;

/// Default cap on the qubit count of dense realizations.
pub const DEFAULT_DENSE_CAP: usize = 12;

/// Coefficients with magnitude below this are dropped on canonicalization.
pub const DEFAULT_DROP_TOLERANCE: f64 = 1e-12;

/// Single-qubit Pauli letter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_char(c: char) -> Result<Self> {
        match c {
            'I' | 'i' => Ok(Pauli::I),
            'X' | 'x' => Ok(Pauli::X),
            'Y' | 'y' => Ok(Pauli::Y),
            'Z' | 'z' => Ok(Pauli::Z),
            other => Err(Error::InvalidLetter(other)),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }
}

/// A word over `{I, X, Y, Z}` stored as X/Z bit masks.
///
/// Qubit `q` of an `n`-qubit word lives at bit `n - 1 - q`, matching the
/// basis-index convention of the statevector backend.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PauliWord {
    n_qubits: u8,
    x: u64,
    z: u64,
}

impl PauliWord {
    pub fn identity(n_qubits: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        Ok(Self { n_qubits: n_qubits as u8, x: 0, z: 0 })
    }

    pub fn parse(letters: &str) -> Result<Self> {
        let letters: Vec<Pauli> = letters.chars().map(Pauli::from_char).collect::<Result<_>>()?;
        Self::from_letters(&letters)
    }

    pub fn from_letters(letters: &[Pauli]) -> Result<Self> {
        let n = letters.len();
        check_qubits(n)?;
        let mut word = Self { n_qubits: n as u8, x: 0, z: 0 };
        for (q, &p) in letters.iter().enumerate() {
            word.set(q, p);
        }
        Ok(word)
    }

    /// Word acting as `p` on the listed qubits and identity elsewhere.
    pub fn sparse(n_qubits: usize, ops: &[(usize, Pauli)]) -> Result<Self> {
        let mut word = Self::identity(n_qubits)?;
        for &(q, p) in ops {
            if q >= n_qubits {
                return Err(Error::QubitOutOfRange { qubit: q, n_qubits });
            }
            word.set(q, p);
        }
        Ok(word)
    }

    fn set(&mut self, q: usize, p: Pauli) {
        let bit = 1u64 << (self.n_qubits as usize - 1 - q);
        self.x &= !bit;
        self.z &= !bit;
        match p {
            Pauli::I => {}
            Pauli::X => self.x |= bit,
            Pauli::Y => {
                self.x |= bit;
                self.z |= bit;
            }
            Pauli::Z => self.z |= bit,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits as usize
    }

    pub fn letter(&self, q: usize) -> Pauli {
        let bit = 1u64 << (self.n_qubits as usize - 1 - q);
        Pauli::from_bits(self.x & bit != 0, self.z & bit != 0)
    }

    pub fn letters(&self) -> impl Iterator<Item = Pauli> + '_ {
        (0..self.n_qubits()).map(move |q| self.letter(q))
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// Qubits on which the word acts non-trivially, ascending.
    pub fn support(&self) -> Vec<usize> {
        (0..self.n_qubits()).filter(|&q| self.letter(q) != Pauli::I).collect()
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    /// Whether the word is diagonal in the computational basis.
    pub fn is_diagonal(&self) -> bool {
        self.x == 0
    }

    /// Action on a basis state: `P|b> = phase |b'>`.
    #[inline]
    pub fn apply_to_index(&self, index: usize) -> (C64, usize) {
        let y_count = (self.x & self.z).count_ones();
        let sign_flips = (index as u64 & self.z).count_ones();
        let mut phase = match y_count % 4 {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        };
        if sign_flips % 2 == 1 {
            phase = -phase;
        }
        (phase, index ^ self.x as usize)
    }
}

impl Ord for PauliWord {
    fn cmp(&self, other: &Self) -> Ordering {
        self.n_qubits
            .cmp(&other.n_qubits)
            .then_with(|| self.letters().cmp(other.letters()))
    }
}

impl PartialOrd for PauliWord {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for PauliWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in self.letters() {
            write!(f, "{}", p.as_char())?;
        }
        Ok(())
    }
}

fn check_qubits(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("a Pauli word needs at least one qubit".into()));
    }
    if n > MAX_QUBITS {
        return Err(Error::TooManyQubits { max: MAX_QUBITS, found: n });
    }
    Ok(())
}

/// One weighted Pauli word.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PauliTerm {
    pub coeff: C64,
    pub word: PauliWord,
}

impl PauliTerm {
    pub fn new(coeff: C64, word: PauliWord) -> Self {
        Self { coeff, word }
    }
}

/// Canonical sum of Pauli terms over a fixed register.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliSum {
    n_qubits: usize,
    terms: Vec<PauliTerm>,
}

impl PauliSum {
    pub fn zero(n_qubits: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        Ok(Self { n_qubits, terms: Vec::new() })
    }

    pub fn identity(n_qubits: usize, coeff: C64) -> Result<Self> {
        Self::new(n_qubits, [PauliTerm::new(coeff, PauliWord::identity(n_qubits)?)])
    }

    /// Canonicalizes `terms` with [`DEFAULT_DROP_TOLERANCE`].
    pub fn new(n_qubits: usize, terms: impl IntoIterator<Item = PauliTerm>) -> Result<Self> {
        Self::with_tolerance(n_qubits, terms, DEFAULT_DROP_TOLERANCE)
    }

    pub fn with_tolerance(
        n_qubits: usize,
        terms: impl IntoIterator<Item = PauliTerm>,
        drop_tolerance: f64,
    ) -> Result<Self> {
        check_qubits(n_qubits)?;
        let mut merged: BTreeMap<PauliWord, C64> = BTreeMap::new();
        for term in terms {
            if term.word.n_qubits() != n_qubits {
                return Err(Error::WordLength { expected: n_qubits, found: term.word.n_qubits() });
            }
            if !(term.coeff.re.is_finite() && term.coeff.im.is_finite()) {
                return Err(Error::NonFinite);
            }
            *merged.entry(term.word).or_insert(C64::new(0.0, 0.0)) += term.coeff;
        }
        let terms = merged
            .into_iter()
            .filter(|(_, c)| c.norm() >= drop_tolerance)
            .map(|(word, coeff)| PauliTerm { coeff, word })
            .collect();
        Ok(Self { n_qubits, terms })
    }

    /// Builds a sum from `(coefficient, letters)` pairs, e.g. `(1.0, "ZZI")`.
    pub fn from_strs<S: AsRef<str>>(n_qubits: usize, terms: &[(C64, S)]) -> Result<Self> {
        let parsed = terms
            .iter()
            .map(|(c, s)| Ok(PauliTerm::new(*c, PauliWord::parse(s.as_ref())?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(n_qubits, parsed)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient of the identity word (zero when absent).
    pub fn identity_coefficient(&self) -> C64 {
        self.terms
            .iter()
            .find(|t| t.word.is_identity())
            .map_or(C64::new(0.0, 0.0), |t| t.coeff)
    }

    /// Re-runs canonicalization; a no-op on any value built by this module.
    pub fn canonicalized(&self) -> Self {
        Self::new(self.n_qubits, self.terms.iter().copied()).expect("terms already validated")
    }

    fn check_same_register(&self, other: &Self) -> Result<()> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::QubitCountMismatch { expected: self.n_qubits, found: other.n_qubits });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_register(other)?;
        Self::new(self.n_qubits, self.terms.iter().chain(other.terms.iter()).copied())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self::new(self.n_qubits, self.terms.iter().map(|t| PauliTerm::new(t.coeff * factor, t.word)))
            .expect("scaling keeps terms valid")
    }

    /// Operator adjoint; Pauli words are Hermitian so only coefficients change.
    pub fn adjoint(&self) -> Self {
        Self {
            n_qubits: self.n_qubits,
            terms: self.terms.iter().map(|t| PauliTerm::new(t.coeff.conj(), t.word)).collect(),
        }
    }

    /// Largest imaginary coefficient part; zero iff the operator is Hermitian.
    pub fn anti_hermitian_residual(&self) -> f64 {
        self.terms.iter().map(|t| t.coeff.im.abs()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.anti_hermitian_residual() <= tol
    }

    pub fn require_hermitian(&self) -> Result<()> {
        let residual = self.anti_hermitian_residual();
        if residual > DEFAULT_DROP_TOLERANCE {
            return Err(Error::NotHermitian { residual });
        }
        Ok(())
    }

    /// Sum of absolute coefficients, ignoring the identity term.
    pub fn one_norm_without_identity(&self) -> f64 {
        self.terms.iter().filter(|t| !t.word.is_identity()).map(|t| t.coeff.norm()).sum()
    }

    /// `out += self * amps` on a statevector of matching dimension.
    pub fn apply_add(&self, amps: &[C64], out: &mut [C64]) {
        debug_assert_eq!(amps.len(), 1usize << self.n_qubits);
        debug_assert_eq!(out.len(), amps.len());
        for term in &self.terms {
            for (idx, &a) in amps.iter().enumerate() {
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let (phase, target) = term.word.apply_to_index(idx);
                out[target] += term.coeff * phase * a;
            }
        }
    }

    pub fn apply(&self, amps: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); amps.len()];
        self.apply_add(amps, &mut out);
        out
    }

    pub fn to_dense(&self) -> Result<DMatrix<C64>> {
        self.to_dense_with_cap(DEFAULT_DENSE_CAP)
    }

    /// Dense `2^n x 2^n` realization, qubit 0 most significant.
    pub fn to_dense_with_cap(&self, cap: usize) -> Result<DMatrix<C64>> {
        if self.n_qubits > cap {
            return Err(Error::DenseCapExceeded { n_qubits: self.n_qubits, cap });
        }
        let dim = 1usize << self.n_qubits;
        let mut m = DMatrix::from_element(dim, dim, C64::new(0.0, 0.0));
        for term in &self.terms {
            for col in 0..dim {
                let (phase, row) = term.word.apply_to_index(col);
                m[(row, col)] += term.coeff * phase;
            }
        }
        Ok(m)
    }
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({}{:+}i) {}", t.coeff.re, t.coeff.im, t.word)?;
        }
        Ok(())
    }
}

/// `H = H0 + iV` with Hermitian `H0`, `V` and a shift `x` such that
/// `V - xI` is negative semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitHamiltonian {
    h0: PauliSum,
    v: PauliSum,
    shift: f64,
}

impl SplitHamiltonian {
    pub fn h0(&self) -> &PauliSum {
        &self.h0
    }

    pub fn v(&self) -> &PauliSum {
        &self.v
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn n_qubits(&self) -> usize {
        self.h0.n_qubits
    }

    /// `V - xI`, the negative semidefinite dissipator.
    pub fn shifted_v(&self) -> PauliSum {
        let id = PauliSum::identity(self.n_qubits(), C64::new(-self.shift, 0.0)).expect("valid register");
        self.v.add(&id).expect("same register")
    }

    /// `H0 + iV`.
    pub fn reconstruct(&self) -> PauliSum {
        self.h0.add(&self.v.scale(C64::new(0.0, 1.0))).expect("same register")
    }

    /// `H0 + i(V - xI)`: the Hamiltonian whose propagator is a contraction.
    pub fn shifted_hamiltonian(&self) -> PauliSum {
        self.h0.add(&self.shifted_v().scale(C64::new(0.0, 1.0))).expect("same register")
    }

    pub fn is_hermitian(&self) -> bool {
        self.v.is_empty()
    }
}

/// Splits `h` into its Hermitian and anti-Hermitian parts and attaches the
/// shift bound of the anti-Hermitian part.
pub fn hermitian_split(h: &PauliSum) -> SplitHamiltonian {
    let n = h.n_qubits;
    let h0 = PauliSum::new(n, h.terms.iter().map(|t| PauliTerm::new(C64::new(t.coeff.re, 0.0), t.word)))
        .expect("valid terms");
    let v = PauliSum::new(n, h.terms.iter().map(|t| PauliTerm::new(C64::new(t.coeff.im, 0.0), t.word)))
        .expect("valid terms");
    let shift = shift_bound(&v).expect("V is Hermitian by construction");
    SplitHamiltonian { h0, v, shift }
}

/// `x` such that `V - xI` is negative semidefinite: the sum of absolute
/// non-identity coefficients plus the (signed) identity coefficient.
pub fn shift_bound(v: &PauliSum) -> Result<f64> {
    v.require_hermitian()?;
    Ok(v.one_norm_without_identity() + v.identity_coefficient().re)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn split_of_hermitian_input_has_no_dissipator() {
        let h = PauliSum::from_strs(1, &[(c(1.0, 0.0), "Z")]).unwrap();
        let s = hermitian_split(&h);
        assert_eq!(s.h0(), &h);
        assert!(s.v().is_empty());
        assert_eq!(s.shift(), 0.0);
    }

    #[test]
    fn split_of_anti_hermitian_input() {
        let h = PauliSum::from_strs(1, &[(c(0.0, 1.0), "Z")]).unwrap();
        let s = hermitian_split(&h);
        assert!(s.h0().is_empty());
        assert_eq!(s.v(), &PauliSum::from_strs(1, &[(c(1.0, 0.0), "Z")]).unwrap());
        assert_eq!(s.shift(), 1.0);
    }

    #[test]
    fn shift_bound_examples() {
        assert_eq!(shift_bound(&PauliSum::zero(2).unwrap()).unwrap(), 0.0);
        let v = PauliSum::from_strs(1, &[(c(0.5, 0.0), "X"), (c(0.5, 0.0), "Z")]).unwrap();
        assert!((shift_bound(&v).unwrap() - 1.0).abs() < 1e-15);
        let v = PauliSum::from_strs(1, &[(c(0.0, 0.5), "X")]).unwrap();
        assert!(matches!(shift_bound(&v), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn identity_term_enters_shift_with_sign() {
        let v = PauliSum::from_strs(2, &[(c(-0.25, 0.0), "II"), (c(1.0, 0.0), "XZ")]).unwrap();
        assert!((shift_bound(&v).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn adjoint_conjugates_coefficients() {
        let h = PauliSum::from_strs(2, &[(c(1.0, 2.0), "XY"), (c(0.0, 1.0), "ZI")]).unwrap();
        let a = h.adjoint();
        assert_eq!(a.terms()[0].coeff, c(1.0, -2.0));
        assert_eq!(a.terms()[1].coeff, c(0.0, -1.0));
        let d = h.to_dense().unwrap();
        assert!((a.to_dense().unwrap() - d.adjoint()).norm() < 1e-14);
    }

    #[test]
    fn dense_letters() {
        let i = PauliSum::from_strs(1, &[(c(1.0, 0.0), "I")]).unwrap().to_dense().unwrap();
        assert_eq!(i, DMatrix::identity(2, 2));
        let z = PauliSum::from_strs(1, &[(c(1.0, 0.0), "Z")]).unwrap().to_dense().unwrap();
        assert_eq!(z[(0, 0)], c(1.0, 0.0));
        assert_eq!(z[(1, 1)], c(-1.0, 0.0));
        let y = PauliSum::from_strs(1, &[(c(1.0, 0.0), "Y")]).unwrap().to_dense().unwrap();
        assert_eq!(y[(0, 1)], c(0.0, -1.0));
        assert_eq!(y[(1, 0)], c(0.0, 1.0));
        let xx = PauliSum::from_strs(2, &[(c(1.0, 0.0), "XX")]).unwrap().to_dense().unwrap();
        for r in 0..4 {
            for col in 0..4 {
                let expected = if r + col == 3 { 1.0 } else { 0.0 };
                assert_eq!(xx[(r, col)], c(expected, 0.0));
            }
        }
    }

    #[test]
    fn qubit_zero_is_most_significant() {
        // Z on qubit 0 of two qubits is diag(1, 1, -1, -1).
        let z0 = PauliSum::from_strs(2, &[(c(1.0, 0.0), "ZI")]).unwrap().to_dense().unwrap();
        let diag: Vec<f64> = (0..4).map(|i| z0[(i, i)].re).collect();
        assert_eq!(diag, vec![1.0, 1.0, -1.0, -1.0]);
    }

    #[test]
    fn dense_cap_is_enforced() {
        let h = PauliSum::zero(4).unwrap();
        assert!(matches!(h.to_dense_with_cap(3), Err(Error::DenseCapExceeded { .. })));
    }

    #[test]
    fn canonicalization_merges_and_drops() {
        let h = PauliSum::from_strs(
            2,
            &[(c(1.0, 0.0), "XZ"), (c(-1.0, 0.0), "XZ"), (c(0.5, 0.0), "ZZ"), (c(1e-14, 0.0), "YY")],
        )
        .unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!(h.terms()[0].word.to_string(), "ZZ");
    }

    #[test]
    fn malformed_words_are_rejected() {
        assert!(matches!(PauliWord::parse("XQ"), Err(Error::InvalidLetter('Q'))));
        assert!(matches!(
            PauliSum::from_strs(3, &[(c(1.0, 0.0), "XX")]),
            Err(Error::WordLength { expected: 3, found: 2 })
        ));
        assert!(matches!(
            PauliSum::from_strs(1, &[(c(f64::NAN, 0.0), "X")]),
            Err(Error::NonFinite)
        ));
    }

    #[test]
    fn terms_sort_lexicographically() {
        let h = PauliSum::from_strs(2, &[(c(1.0, 0.0), "ZI"), (c(1.0, 0.0), "IX"), (c(1.0, 0.0), "YI")])
            .unwrap();
        let words: Vec<String> = h.terms().iter().map(|t| t.word.to_string()).collect();
        assert_eq!(words, vec!["IX", "YI", "ZI"]);
    }
}
