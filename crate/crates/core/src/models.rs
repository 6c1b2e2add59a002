//! Model Hamiltonians, initial states and observables.
//!
//! Fermionic sites map to qubits with `|1>` meaning occupied, so
//! `n_j = (I - Z_j) / 2` and the Jordan-Wigner annihilator is
//! `c_j = Z_0 ... Z_{j-1} (X_j + i Y_j) / 2`.

use crate::pauli::{Pauli, PauliSum, PauliTerm, PauliWord};
use crate::prelude::*;
use crate::statevec::{basis_state, Observable, StateVector};
use crate::{Error, Result};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn term(n: usize, coeff: C64, ops: &[(usize, Pauli)]) -> Result<PauliTerm> {
    Ok(PauliTerm::new(coeff, PauliWord::sparse(n, ops)?))
}

/// Open-chain transverse Ising model with complex field `g_r + i g_i`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IsingSpec {
    pub n: usize,
    pub j: f64,
    pub g_r: f64,
    pub g_i: f64,
}

impl IsingSpec {
    pub fn new(n: usize, j: f64, g_r: f64, g_i: f64) -> Self {
        Self { n, j, g_r, g_i }
    }
}

/// `-J sum Z_i Z_{i+1} - g sum X_i`.
pub fn ising_hamiltonian(spec: &IsingSpec) -> Result<PauliSum> {
    let n = spec.n;
    if n < 2 {
        return Err(Error::InvalidArgument(format!("Ising chain needs n >= 2, got {n}")));
    }
    let mut terms = Vec::with_capacity(2 * n - 1);
    for i in 0..n - 1 {
        terms.push(term(n, c(-spec.j, 0.0), &[(i, Pauli::Z), (i + 1, Pauli::Z)])?);
    }
    for i in 0..n {
        terms.push(term(n, c(-spec.g_r, -spec.g_i), &[(i, Pauli::X)])?);
    }
    PauliSum::new(n, terms)
}

/// Interaction used by the particle-hole dual of the Hatano-Nelson chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DualForm {
    /// Swapped hoppings with `U (1 - n_j)(1 - n_{j+1})`: the exact image of
    /// the original chain under `c_j -> (-1)^j c_j^dagger`.
    #[default]
    Exact,
    /// Swapped hoppings only, keeping `U n_j n_{j+1}`. Differs from the exact
    /// dual by the boundary term `U (n_0 + n_{n-1})` at fixed filling.
    SwapOnly,
}

/// Interacting Hatano-Nelson chain with `t_R = e^g`, `t_L = e^{-g}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HatanoNelsonSpec {
    pub n: usize,
    pub g: f64,
    pub u: f64,
    pub dual: bool,
    pub dual_form: DualForm,
}

impl HatanoNelsonSpec {
    pub fn new(n: usize, g: f64, u: f64, dual: bool) -> Self {
        Self { n, g, u, dual, dual_form: DualForm::Exact }
    }

    pub fn t_r(&self) -> f64 {
        self.g.exp()
    }

    pub fn t_l(&self) -> f64 {
        (-self.g).exp()
    }
}

/// Qubit form of `a c_{j+1}^dagger c_j + b c_j^dagger c_{j+1}` on
/// neighbouring sites: `(a + b)/4 (XX + YY) + i (b - a)/4 (XY - YX)`.
fn push_hopping(terms: &mut Vec<PauliTerm>, n: usize, j: usize, right: f64, left: f64) -> Result<()> {
    let sym = c((right + left) / 4.0, 0.0);
    let anti = c(0.0, (left - right) / 4.0);
    terms.push(term(n, sym, &[(j, Pauli::X), (j + 1, Pauli::X)])?);
    terms.push(term(n, sym, &[(j, Pauli::Y), (j + 1, Pauli::Y)])?);
    terms.push(term(n, anti, &[(j, Pauli::X), (j + 1, Pauli::Y)])?);
    terms.push(term(n, -anti, &[(j, Pauli::Y), (j + 1, Pauli::X)])?);
    Ok(())
}

/// `U n_j n_{j+1}` (or `U (1-n_j)(1-n_{j+1})` when `holes`).
fn push_interaction(terms: &mut Vec<PauliTerm>, n: usize, j: usize, u: f64, holes: bool) -> Result<()> {
    let s = if holes { 1.0 } else { -1.0 };
    let q = u / 4.0;
    terms.push(term(n, c(q, 0.0), &[])?);
    terms.push(term(n, c(s * q, 0.0), &[(j, Pauli::Z)])?);
    terms.push(term(n, c(s * q, 0.0), &[(j + 1, Pauli::Z)])?);
    terms.push(term(n, c(q, 0.0), &[(j, Pauli::Z), (j + 1, Pauli::Z)])?);
    Ok(())
}

/// Jordan-Wigner qubit Hamiltonian of
/// `sum_j t_R c_{j+1}^dagger c_j + t_L c_j^dagger c_{j+1} + U n_j n_{j+1}`,
/// or of its particle-hole dual when `spec.dual` is set.
pub fn hn_hamiltonian(spec: &HatanoNelsonSpec) -> Result<PauliSum> {
    let n = spec.n;
    if n < 2 {
        return Err(Error::InvalidArgument(format!("Hatano-Nelson chain needs n >= 2, got {n}")));
    }
    let (right, left) = if spec.dual { (spec.t_l(), spec.t_r()) } else { (spec.t_r(), spec.t_l()) };
    let holes = spec.dual && spec.dual_form == DualForm::Exact;
    let mut terms = Vec::with_capacity(8 * (n - 1));
    for j in 0..n - 1 {
        push_hopping(&mut terms, n, j, right, left)?;
        push_interaction(&mut terms, n, j, spec.u, holes)?;
    }
    PauliSum::new(n, terms)
}

/// Two particles on the central sites, or the complementary hole state for
/// the dual chain: `|0000110000>` and `|1111001111>` at `n = 10`.
pub fn hn_initial_state(spec: &HatanoNelsonSpec) -> Result<StateVector> {
    let n = spec.n;
    if n < 2 {
        return Err(Error::InvalidArgument(format!("Hatano-Nelson chain needs n >= 2, got {n}")));
    }
    let left = (n - 2) / 2;
    let bits: String = (0..n)
        .map(|q| {
            let centre = q == left || q == left + 1;
            if centre != spec.dual {
                '1'
            } else {
                '0'
            }
        })
        .collect();
    basis_state(n, &bits)
}

/// Single-band SSH-type qubit model `gamma [h_x X + (h_z + i/2) Z]` with
/// `h_x = v + r cos k`, `h_z = r sin k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SshSpec {
    pub v: f64,
    pub r: f64,
    pub gamma: f64,
    pub k: f64,
}

impl SshSpec {
    pub fn h_x(&self) -> f64 {
        self.v + self.r * self.k.cos()
    }

    pub fn h_z(&self) -> f64 {
        self.r * self.k.sin()
    }
}

pub fn ssh_hamiltonian(spec: &SshSpec) -> Result<PauliSum> {
    let g = spec.gamma;
    PauliSum::new(
        1,
        [term(1, c(g * spec.h_x(), 0.0), &[(0, Pauli::X)])?, term(1, c(g * spec.h_z(), g * 0.5), &[(0, Pauli::Z)])?],
    )
}

/// Named observable.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservableSpec {
    pub name: String,
    pub observable: Observable,
}

impl ObservableSpec {
    pub fn new(name: impl Into<String>, observable: Observable) -> Self {
        Self { name: name.into(), observable }
    }
}

/// `(1/n) sum_j Z_j`.
pub fn magnetization(n: usize) -> Result<PauliSum> {
    let w = c(1.0 / n as f64, 0.0);
    PauliSum::new(n, (0..n).map(|j| term(n, w, &[(j, Pauli::Z)])).collect::<Result<Vec<_>>>()?)
}

/// `(I - Z_j) / 2`.
pub fn occupation(n: usize, j: usize) -> Result<PauliSum> {
    PauliSum::new(n, [term(n, c(0.5, 0.0), &[])?, term(n, c(-0.5, 0.0), &[(j, Pauli::Z)])?])
}

/// `sum_j n_j`.
pub fn particle_number(n: usize) -> Result<PauliSum> {
    let mut total = PauliSum::zero(n)?;
    for j in 0..n {
        total = total.add(&occupation(n, j)?)?;
    }
    Ok(total)
}

/// Model selected by name from the CLI.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Model {
    Ising(IsingSpec),
    HatanoNelson(HatanoNelsonSpec),
    Ssh(SshSpec),
}

impl Model {
    /// Registry names: `ising`, `hatano-nelson`, `hatano-nelson-dual`, `ssh`.
    /// Parameters default to the benchmark values.
    pub fn by_name(name: &str) -> Result<Self> {
        Ok(match name {
            "ising" => Model::Ising(IsingSpec::new(6, 1.0, 2.0, 0.5)),
            "hatano-nelson" => Model::HatanoNelson(HatanoNelsonSpec::new(10, 1.0, 1.0, false)),
            "hatano-nelson-dual" => Model::HatanoNelson(HatanoNelsonSpec::new(10, 1.0, 1.0, true)),
            "ssh" => Model::Ssh(SshSpec { v: 0.3, r: 1.0, gamma: 3.5, k: 0.3 * core::f64::consts::PI }),
            other => return Err(Error::InvalidArgument(format!("unknown model `{other}`"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Model::Ising(_) => "ising",
            Model::HatanoNelson(s) if s.dual => "hatano-nelson-dual",
            Model::HatanoNelson(_) => "hatano-nelson",
            Model::Ssh(_) => "ssh",
        }
    }

    pub fn n_qubits(&self) -> usize {
        match self {
            Model::Ising(s) => s.n,
            Model::HatanoNelson(s) => s.n,
            Model::Ssh(_) => 1,
        }
    }

    pub fn hamiltonian(&self) -> Result<PauliSum> {
        match self {
            Model::Ising(s) => ising_hamiltonian(s),
            Model::HatanoNelson(s) => hn_hamiltonian(s),
            Model::Ssh(s) => ssh_hamiltonian(s),
        }
    }

    pub fn initial_state(&self) -> Result<StateVector> {
        match self {
            Model::HatanoNelson(s) => hn_initial_state(s),
            _ => StateVector::zero(self.n_qubits()),
        }
    }

    pub fn observables(&self) -> Result<Vec<ObservableSpec>> {
        observables_for(self)
    }
}

/// Ising: `S_z`. Hatano-Nelson: every `n_j` and then `N`. SSH: the
/// Loschmidt echo `|<0|psi>|^2`.
pub fn observables_for(model: &Model) -> Result<Vec<ObservableSpec>> {
    Ok(match model {
        Model::Ising(s) => vec![ObservableSpec::new("S_z", Observable::Pauli(magnetization(s.n)?))],
        Model::HatanoNelson(s) => {
            let mut out: Vec<ObservableSpec> = (0..s.n)
                .map(|j| Ok(ObservableSpec::new(format!("n_{j}"), Observable::Pauli(occupation(s.n, j)?))))
                .collect::<Result<_>>()?;
            out.push(ObservableSpec::new("N", Observable::Pauli(particle_number(s.n)?)));
            out
        }
        Model::Ssh(_) => vec![ObservableSpec::new("P0", Observable::Projector(StateVector::zero(1)?))],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_eigenvalues, matmul, max_abs_diff};
    use crate::pauli::hermitian_split;
    use crate::statevec::exact_evolve;
    use nalgebra::DMatrix;

    /// `c_j |idx>` from occupation bit strings, independent of any Pauli
    /// algebra: `(-1)^{sum_{l<j} n_l} |idx - e_j>`.
    fn annihilate(n: usize, j: usize, idx: usize) -> Option<(f64, usize)> {
        let occ = |q: usize| idx >> (n - 1 - q) & 1 == 1;
        if !occ(j) {
            return None;
        }
        let parity = (0..j).filter(|&l| occ(l)).count();
        Some((if parity % 2 == 0 { 1.0 } else { -1.0 }, idx ^ (1 << (n - 1 - j))))
    }

    fn create(n: usize, j: usize, idx: usize) -> Option<(f64, usize)> {
        if idx >> (n - 1 - j) & 1 == 1 {
            return None;
        }
        let flipped = idx ^ (1 << (n - 1 - j));
        annihilate(n, j, flipped).map(|(s, _)| (s, flipped))
    }

    /// `c_a^dagger c_b` as a column action.
    fn hop(n: usize, a: usize, b: usize, idx: usize) -> Option<(f64, usize)> {
        let (s1, i1) = annihilate(n, b, idx)?;
        let (s2, i2) = create(n, a, i1)?;
        Some((s1 * s2, i2))
    }

    fn fock_hn(n: usize, t_r: f64, t_l: f64, u: f64, holes: bool) -> DMatrix<C64> {
        let dim = 1usize << n;
        let mut h = DMatrix::zeros(dim, dim);
        for idx in 0..dim {
            let occ = |q: usize| (idx >> (n - 1 - q) & 1) as f64;
            for j in 0..n - 1 {
                if let Some((s, out)) = hop(n, j + 1, j, idx) {
                    h[(out, idx)] += c(s * t_r, 0.0);
                }
                if let Some((s, out)) = hop(n, j, j + 1, idx) {
                    h[(out, idx)] += c(s * t_l, 0.0);
                }
                let (a, b) = if holes { (1.0 - occ(j), 1.0 - occ(j + 1)) } else { (occ(j), occ(j + 1)) };
                h[(idx, idx)] += c(u * a * b, 0.0);
            }
        }
        h
    }

    #[test]
    fn ising_examples() {
        let h = ising_hamiltonian(&IsingSpec::new(2, 1.0, 0.0, 0.0)).unwrap();
        assert_eq!(h, PauliSum::from_strs(2, &[(c(-1.0, 0.0), "ZZ")]).unwrap());
        let h = ising_hamiltonian(&IsingSpec::new(6, 1.0, 2.0, 0.0)).unwrap();
        assert_eq!(h.len(), 11);
        assert!(hermitian_split(&h).v().is_empty());
        let h = ising_hamiltonian(&IsingSpec::new(6, 1.0, 2.0, 1.0)).unwrap();
        assert!((hermitian_split(&h).shift() - 6.0).abs() < 1e-12);
        assert!(ising_hamiltonian(&IsingSpec::new(1, 1.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn free_two_site_hopping() {
        let h = hn_hamiltonian(&HatanoNelsonSpec::new(2, 0.0, 0.0, false)).unwrap();
        let want = PauliSum::from_strs(2, &[(c(0.5, 0.0), "XX"), (c(0.5, 0.0), "YY")]).unwrap();
        assert!(h.sub(&want).unwrap().is_empty());
        let fock = fock_hn(2, 1.0, 1.0, 0.0, false);
        assert!(max_abs_diff(&h.to_dense().unwrap(), &fock) < 1e-14);
    }

    #[test]
    fn interaction_expansion() {
        let mut spec = HatanoNelsonSpec::new(2, 0.0, 1.0, false);
        let h = hn_hamiltonian(&spec).unwrap();
        spec.u = 0.0;
        let hop = hn_hamiltonian(&spec).unwrap();
        let want = PauliSum::from_strs(
            2,
            &[(c(0.25, 0.0), "II"), (c(-0.25, 0.0), "ZI"), (c(-0.25, 0.0), "IZ"), (c(0.25, 0.0), "ZZ")],
        )
        .unwrap();
        assert!(h.sub(&hop).unwrap().sub(&want).unwrap().is_empty());
    }

    #[test]
    fn jordan_wigner_matches_fock_space() {
        for (n, g, u) in [(3, 0.4, -0.7), (4, 1.0, 1.0), (5, -0.3, 2.1)] {
            for dual in [false, true] {
                let spec = HatanoNelsonSpec::new(n, g, u, dual);
                let h = hn_hamiltonian(&spec).unwrap().to_dense().unwrap();
                let (r, l) = if dual { (spec.t_l(), spec.t_r()) } else { (spec.t_r(), spec.t_l()) };
                assert!(max_abs_diff(&h, &fock_hn(n, r, l, u, dual)) < 1e-12, "n={n} dual={dual}");
            }
        }
    }

    #[test]
    fn particle_number_commutes() {
        let spec = HatanoNelsonSpec::new(4, 1.0, 1.0, false);
        let h = hn_hamiltonian(&spec).unwrap().to_dense().unwrap();
        let num = particle_number(4).unwrap().to_dense().unwrap();
        assert!(max_abs_diff(&matmul(&h, &num), &matmul(&num, &h)) < 1e-12);
    }

    #[test]
    fn two_particle_sector_spectrum_n10() {
        let spec = HatanoNelsonSpec::new(10, 1.0, 1.0, false);
        let h = hn_hamiltonian(&spec).unwrap();
        let _ = hermitian_split(&h);
        let dense = h.to_dense().unwrap();
        let fock = fock_hn(10, spec.t_r(), spec.t_l(), 1.0, false);
        let sector: Vec<usize> = (0..1024usize).filter(|i| i.count_ones() == 2).collect();
        let restrict = |m: &DMatrix<C64>| DMatrix::from_fn(sector.len(), sector.len(), |a, b| m[(sector[a], sector[b])]);
        assert!(max_abs_diff(&restrict(&dense), &restrict(&fock)) < 1e-12);
        // Imaginary gauge: D H(g=0) D^{-1} = H(g) with D = exp(g sum_j j n_j),
        // so the sector spectrum is the real spectrum of the Hermitian chain.
        let herm = restrict(&hn_hamiltonian(&HatanoNelsonSpec::new(10, 0.0, 1.0, false)).unwrap().to_dense().unwrap());
        let weight = |idx: usize| (0..10).filter(|&q| idx >> (9 - q) & 1 == 1).map(|q| q as f64).sum::<f64>();
        let gauged = DMatrix::from_fn(sector.len(), sector.len(), |a, b| {
            herm[(a, b)] * (spec.g * (weight(sector[a]) - weight(sector[b]))).exp()
        });
        assert!(max_abs_diff(&gauged, &restrict(&dense)) < 1e-10);
        let ev = hermitian_eigenvalues(&herm);
        let trace: C64 = (0..sector.len()).map(|i| dense[(sector[i], sector[i])]).sum();
        assert!((trace.re - ev.iter().sum::<f64>()).abs() < 1e-9);
    }

    #[test]
    fn initial_states() {
        let spec = HatanoNelsonSpec::new(10, 1.0, 1.0, false);
        assert_eq!(hn_initial_state(&spec).unwrap(), basis_state(10, "0000110000").unwrap());
        let dual = HatanoNelsonSpec::new(10, 1.0, 1.0, true);
        assert_eq!(hn_initial_state(&dual).unwrap(), basis_state(10, "1111001111").unwrap());
        assert_eq!(hn_initial_state(&HatanoNelsonSpec::new(2, 1.0, 1.0, false)).unwrap(), basis_state(2, "11").unwrap());
    }

    #[test]
    fn particle_hole_duality_is_exact() {
        let n = 6;
        let p = HatanoNelsonSpec::new(n, 1.0, 1.0, false);
        let h = HatanoNelsonSpec::new(n, 1.0, 1.0, true);
        let (hp, hh) = (hn_hamiltonian(&p).unwrap(), hn_hamiltonian(&h).unwrap());
        let (sp, sh) = (hn_initial_state(&p).unwrap(), hn_initial_state(&h).unwrap());
        for t in [0.5, 1.5, 3.0] {
            let ep = exact_evolve(&hp, t, &sp).unwrap().state;
            let eh = exact_evolve(&hh, t, &sh).unwrap().state;
            for j in 0..n {
                let nj = occupation(n, j).unwrap();
                let a = ep.expectation(&nj).unwrap();
                let b = eh.expectation(&nj).unwrap();
                assert!((a - (1.0 - b)).abs() < 1e-8, "t={t} j={j}");
            }
        }
    }

    #[test]
    fn swap_only_dual_breaks_symmetry_at_the_edges() {
        let n = 4;
        let mut h = HatanoNelsonSpec::new(n, 1.0, 1.0, true);
        let exact = hn_hamiltonian(&h).unwrap();
        h.dual_form = DualForm::SwapOnly;
        let literal = hn_hamiltonian(&h).unwrap();
        let diff = exact.sub(&literal).unwrap();
        // U(1-n_j)(1-n_{j+1}) - U n_j n_{j+1} = U(1 - n_j - n_{j+1}) summed.
        let mut want = PauliSum::identity(n, c((n - 1) as f64, 0.0)).unwrap();
        for j in 0..n - 1 {
            want = want.sub(&occupation(n, j).unwrap()).unwrap().sub(&occupation(n, j + 1).unwrap()).unwrap();
        }
        assert!(diff.sub(&want).unwrap().is_empty());
    }

    #[test]
    fn ssh_examples() {
        let spec = SshSpec { v: 0.3, r: 1.0, gamma: 3.5, k: 0.3 * core::f64::consts::PI };
        assert!((spec.h_x() - (0.3 + (0.3 * core::f64::consts::PI).cos())).abs() < 1e-15);
        assert!(ssh_hamiltonian(&SshSpec { gamma: 0.0, ..spec }).unwrap().is_empty());
        let h = ssh_hamiltonian(&SshSpec { v: 1.0, r: 0.0, gamma: 1.0, k: 0.0 }).unwrap();
        let s = hermitian_split(&h);
        assert_eq!(s.v(), &PauliSum::from_strs(1, &[(c(0.5, 0.0), "Z")]).unwrap());
        assert!((s.shift() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn observable_values() {
        let obs = observables_for(&Model::by_name("ising").unwrap()).unwrap();
        assert!((obs[0].observable.evaluate(&StateVector::zero(6).unwrap()).unwrap() - 1.0).abs() < 1e-15);
        let obs = observables_for(&Model::by_name("hatano-nelson-dual").unwrap()).unwrap();
        assert_eq!(obs.len(), 11);
        let psi = basis_state(10, "1111001111").unwrap();
        assert!((obs[10].observable.evaluate(&psi).unwrap() - 8.0).abs() < 1e-12);
        let obs = observables_for(&Model::by_name("ssh").unwrap()).unwrap();
        assert_eq!(obs[0].observable.evaluate(&StateVector::zero(1).unwrap()).unwrap(), 1.0);
        assert!(Model::by_name("heisenberg").is_err());
    }
}
