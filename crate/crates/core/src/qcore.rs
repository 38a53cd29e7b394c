//! Finite-dimensional complex linear algebra for states on labelled,
//! multipartite Hilbert spaces.
//!
//! Matrices are dense `nalgebra` matrices over `Complex<f64>`. Composite
//! systems are ordered lists of [`HilbertLabel`]s; the first label is the
//! most significant tensor factor (row-major Kronecker convention).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QwkError, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const TOL_HERM: f64 = 1e-9;
pub const TOL_PSD: f64 = 1e-9;
pub const TOL_TRACE: f64 = 1e-9;
pub const TOL_NORM: f64 = 1e-9;
pub const TOL_RECON: f64 = 1e-8;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// A named tensor factor.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HilbertLabel {
    pub name: String,
    pub dim: usize,
}

impl HilbertLabel {
    pub fn new(name: impl Into<String>, dim: usize) -> Self {
        assert!(dim >= 1, "Hilbert space dimension must be positive");
        Self {
            name: name.into(),
            dim,
        }
    }
}

pub fn total_dim(system: &[HilbertLabel]) -> usize {
    system.iter().map(|l| l.dim).product()
}

fn check_unique(system: &[HilbertLabel]) -> Result<()> {
    for (i, a) in system.iter().enumerate() {
        if system[..i].iter().any(|b| b.name == a.name) {
            return Err(QwkError::LabelCollision(a.name.clone()));
        }
    }
    Ok(())
}

fn concat_systems(a: &[HilbertLabel], b: &[HilbertLabel]) -> Result<Vec<HilbertLabel>> {
    if let Some(clash) = a.iter().find(|x| b.iter().any(|y| y.name == x.name)) {
        return Err(QwkError::LabelCollision(clash.name.clone()));
    }
    Ok(a.iter().chain(b.iter()).cloned().collect())
}

// ---------------------------------------------------------------------------
// Plain matrix helpers

pub fn identity(d: usize) -> CMat {
    CMat::identity(d, d)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn kron_vec(a: &CVec, b: &CVec) -> CVec {
    a.kronecker(b)
}

pub fn ket(d: usize, i: usize) -> CVec {
    let mut v = CVec::zeros(d);
    v[i] = cr(1.0);
    v
}

pub fn projector(v: &CVec) -> CMat {
    v * v.adjoint()
}

pub fn trace(m: &CMat) -> C64 {
    m.trace()
}

/// Largest entry-wise deviation from Hermiticity.
pub fn hermitian_deviation(m: &CMat) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn hermitize(m: &CMat) -> CMat {
    (m + m.adjoint()) * cr(0.5)
}

/// Eigen-decomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    /// Sorted descending.
    pub values: Vec<f64>,
    /// Column `i` is the eigenvector of `values[i]`.
    pub vectors: CMat,
}

impl Eigensystem {
    pub fn vector(&self, i: usize) -> CVec {
        self.vectors.column(i).into_owned()
    }

    pub fn reconstruct(&self) -> CMat {
        let n = self.vectors.nrows();
        let mut out = CMat::zeros(n, n);
        for (i, &l) in self.values.iter().enumerate() {
            let v = self.vectors.column(i);
            out += v * v.adjoint() * cr(l);
        }
        out
    }
}

/// Eigenvalues descending; each eigenvector's first non-negligible
/// component is rotated to the positive real axis.
pub fn hermitian_eigensystem(m: &CMat) -> Result<Eigensystem> {
    let dev = hermitian_deviation(m);
    if dev > TOL_HERM {
        return Err(QwkError::NotHermitian(dev));
    }
    Ok(eigh_unchecked(m))
}

pub(crate) fn eigh_unchecked(m: &CMat) -> Eigensystem {
    let n = m.nrows();
    if n == 0 {
        return Eigensystem {
            values: vec![],
            vectors: CMat::zeros(0, 0),
        };
    }
    let eig = SymmetricEigen::new(hermitize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut vectors = CMat::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        values.push(eig.eigenvalues[src]);
        let mut v = eig.eigenvectors.column(src).into_owned();
        if let Some(k) = (0..n).find(|&k| v[k].norm() > 1e-10) {
            let ph = v[k] / v[k].norm();
            v *= ph.conj();
        }
        vectors.set_column(dst, &v);
    }
    Eigensystem { values, vectors }
}

/// Eigenvalues only, descending.
pub fn eigenvalues_hermitian(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 {
        return vec![];
    }
    let mut v: Vec<f64> = SymmetricEigen::new(hermitize(m))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    v
}

/// Apply a real function to the spectrum of a Hermitian matrix.
pub fn hermitian_map(m: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let es = eigh_unchecked(m);
    let n = m.nrows();
    let mut out = CMat::zeros(n, n);
    for (i, &l) in es.values.iter().enumerate() {
        let fl = f(l);
        if fl != 0.0 {
            let v = es.vectors.column(i);
            out += v * v.adjoint() * cr(fl);
        }
    }
    out
}

/// `exp(i·t·H)` for Hermitian `H`.
pub fn unitary_exp(h: &CMat, t: f64) -> CMat {
    let es = eigh_unchecked(h);
    let n = h.nrows();
    let mut out = CMat::zeros(n, n);
    for (i, &l) in es.values.iter().enumerate() {
        let v = es.vectors.column(i);
        out += v * v.adjoint() * c((t * l).cos(), (t * l).sin());
    }
    out
}

/// Square root of a PSD matrix; negative rounding eigenvalues clamp to 0.
pub fn psd_sqrt(m: &CMat) -> CMat {
    hermitian_map(m, |l| l.max(0.0).sqrt())
}

/// Moore–Penrose inverse square root on the support (eigenvalues > `cut`).
pub fn psd_inv_sqrt(m: &CMat, cut: f64) -> CMat {
    hermitian_map(m, |l| if l > cut { 1.0 / l.sqrt() } else { 0.0 })
}

/// Sum of singular values.
pub fn trace_norm(m: &CMat) -> f64 {
    if m.is_square() && hermitian_deviation(m) < 1e-13 {
        return eigenvalues_hermitian(m).iter().map(|l| l.abs()).sum();
    }
    m.clone().svd(false, false).singular_values.iter().sum()
}

/// `‖√ρ √σ‖₁`, the square root of [`fidelity`].
pub fn root_fidelity_matrices(rho: &CMat, sigma: &CMat) -> f64 {
    let s = psd_sqrt(rho) * psd_sqrt(sigma);
    s.svd(false, false).singular_values.iter().sum::<f64>().min(1.0)
}

/// `F(ρ,σ) = ‖√ρ √σ‖₁²`.
pub fn fidelity(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(QwkError::DimensionMismatch(format!(
            "fidelity of {}- and {}-dimensional states",
            rho.dim(),
            sigma.dim()
        )));
    }
    let f = root_fidelity_matrices(&rho.matrix, &sigma.matrix);
    Ok((f * f).clamp(0.0, 1.0))
}

pub fn root_fidelity(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    fidelity(rho, sigma).map(f64::sqrt)
}

// ---------------------------------------------------------------------------
// Multipartite index bookkeeping

/// Offsets into the full index space for the kept and traced factors.
pub(crate) struct Split {
    pub keep_off: Vec<usize>,
    pub trace_off: Vec<usize>,
}

pub(crate) fn split_indices(dims: &[usize], keep: &[usize]) -> Split {
    let k = dims.len();
    let mut strides = vec![1usize; k];
    for i in (0..k.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    let offsets = |factors: Vec<usize>| -> Vec<usize> {
        let mut out = vec![0usize];
        for f in factors {
            let mut next = Vec::with_capacity(out.len() * dims[f]);
            for &o in &out {
                for digit in 0..dims[f] {
                    next.push(o + digit * strides[f]);
                }
            }
            out = next;
        }
        out
    };
    let traced: Vec<usize> = (0..k).filter(|i| !keep.contains(i)).collect();
    let mut kept = keep.to_vec();
    kept.sort_unstable();
    Split {
        keep_off: offsets(kept),
        trace_off: offsets(traced),
    }
}

/// Partial trace of a raw matrix, keeping the factor positions in `keep`.
pub fn partial_trace_matrix(m: &CMat, dims: &[usize], keep: &[usize]) -> CMat {
    let s = split_indices(dims, keep);
    let dk = s.keep_off.len();
    let mut out = CMat::zeros(dk, dk);
    for (r, &ro) in s.keep_off.iter().enumerate() {
        for (cc, &co) in s.keep_off.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for &t in &s.trace_off {
                acc += m[(ro + t, co + t)];
            }
            out[(r, cc)] = acc;
        }
    }
    out
}

/// Reshape a vector into a (kept × traced) matrix.
pub fn bipartition_vector(v: &CVec, dims: &[usize], keep: &[usize]) -> CMat {
    let s = split_indices(dims, keep);
    let mut out = CMat::zeros(s.keep_off.len(), s.trace_off.len());
    for (r, &ro) in s.keep_off.iter().enumerate() {
        for (cc, &t) in s.trace_off.iter().enumerate() {
            out[(r, cc)] = v[ro + t];
        }
    }
    out
}

/// Reduced density matrix of a pure vector.
pub fn reduce_pure(v: &CVec, dims: &[usize], keep: &[usize]) -> CMat {
    let m = bipartition_vector(v, dims, keep);
    &m * m.adjoint()
}

// ---------------------------------------------------------------------------
// States

/// A positive semi-definite unit-trace Hermitian operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    system: Vec<HilbertLabel>,
    pub(crate) matrix: CMat,
}

impl DensityOperator {
    pub fn new(system: Vec<HilbertLabel>, matrix: CMat) -> Result<Self> {
        check_unique(&system)?;
        let d = total_dim(&system);
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(QwkError::DimensionMismatch(format!(
                "matrix is {}x{}, system dimension is {d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let dev = hermitian_deviation(&matrix);
        if dev > TOL_HERM {
            return Err(QwkError::NotHermitian(dev));
        }
        let tr = matrix.trace().re;
        if (tr - 1.0).abs() > TOL_TRACE {
            return Err(QwkError::InvalidState(format!("trace {tr} != 1")));
        }
        let min = eigenvalues_hermitian(&matrix).last().copied().unwrap_or(0.0);
        if min < -TOL_PSD {
            return Err(QwkError::InvalidState(format!(
                "negative eigenvalue {min:.3e}"
            )));
        }
        Ok(Self { system, matrix })
    }

    /// Single-factor state named `name`.
    pub fn on(name: &str, matrix: CMat) -> Result<Self> {
        let d = matrix.nrows();
        Self::new(vec![HilbertLabel::new(name, d)], matrix)
    }

    pub(crate) fn from_parts_unchecked(system: Vec<HilbertLabel>, matrix: CMat) -> Self {
        Self { system, matrix }
    }

    pub fn maximally_mixed(label: HilbertLabel) -> Self {
        let d = label.dim;
        let m = identity(d) * cr(1.0 / d as f64);
        Self {
            system: vec![label],
            matrix: m,
        }
    }

    pub fn basis(label: HilbertLabel, i: usize) -> Self {
        let d = label.dim;
        Self {
            system: vec![label],
            matrix: projector(&ket(d, i)),
        }
    }

    pub fn diagonal(label: HilbertLabel, probs: &[f64]) -> Result<Self> {
        let m = CMat::from_diagonal(&DVector::from_iterator(
            probs.len(),
            probs.iter().map(|&p| cr(p)),
        ));
        Self::new(vec![label], m)
    }

    pub fn system(&self) -> &[HilbertLabel] {
        &self.system
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.system.iter().map(|l| l.dim).collect()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        eigenvalues_hermitian(&self.matrix)
    }

    pub fn relabel(mut self, names: &[&str]) -> Result<Self> {
        if names.len() != self.system.len() {
            return Err(QwkError::DimensionMismatch("label count".into()));
        }
        for (l, n) in self.system.iter_mut().zip(names) {
            l.name = (*n).to_string();
        }
        check_unique(&self.system)?;
        Ok(self)
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        tensor_product(self, other)
    }

    pub fn partial_trace(&self, keep: &[&str]) -> Result<Self> {
        partial_trace(self, keep)
    }
}

/// A unit vector on a labelled system.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    system: Vec<HilbertLabel>,
    pub(crate) vector: CVec,
}

impl PureState {
    pub fn new(system: Vec<HilbertLabel>, vector: CVec) -> Result<Self> {
        check_unique(&system)?;
        let d = total_dim(&system);
        if vector.len() != d {
            return Err(QwkError::DimensionMismatch(format!(
                "vector length {}, system dimension {d}",
                vector.len()
            )));
        }
        let norm = vector.norm();
        if (norm - 1.0).abs() > TOL_NORM {
            return Err(QwkError::InvalidState(format!("norm {norm} != 1")));
        }
        Ok(Self { system, vector })
    }

    pub fn basis(label: HilbertLabel, i: usize) -> Self {
        let v = ket(label.dim, i);
        Self {
            system: vec![label],
            vector: v,
        }
    }

    /// `Σ_j |j⟩|j⟩ / √K` on `a ⊗ b`.
    pub fn maximally_entangled(a: HilbertLabel, b: HilbertLabel) -> Result<Self> {
        if a.dim != b.dim {
            return Err(QwkError::DimensionMismatch("factors differ in dimension".into()));
        }
        let k = a.dim;
        let mut v = CVec::zeros(k * k);
        for j in 0..k {
            v[j * k + j] = cr(1.0 / (k as f64).sqrt());
        }
        Self::new(vec![a, b], v)
    }

    pub fn system(&self) -> &[HilbertLabel] {
        &self.system
    }

    pub fn vector(&self) -> &CVec {
        &self.vector
    }

    pub fn dims(&self) -> Vec<usize> {
        self.system.iter().map(|l| l.dim).collect()
    }

    pub fn to_density(&self) -> DensityOperator {
        DensityOperator::from_parts_unchecked(self.system.clone(), projector(&self.vector))
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let system = concat_systems(&self.system, &other.system)?;
        Ok(Self {
            system,
            vector: kron_vec(&self.vector, &other.vector),
        })
    }

    /// Reduced state on the named factors.
    pub fn reduced(&self, keep: &[&str]) -> Result<DensityOperator> {
        let pos = positions(&self.system, keep)?;
        let m = reduce_pure(&self.vector, &self.dims(), &pos);
        let mut sorted = pos.clone();
        sorted.sort_unstable();
        let system = sorted.iter().map(|&i| self.system[i].clone()).collect();
        Ok(DensityOperator::from_parts_unchecked(system, m))
    }
}

fn positions(system: &[HilbertLabel], keep: &[&str]) -> Result<Vec<usize>> {
    keep.iter()
        .map(|name| {
            system
                .iter()
                .position(|l| l.name == *name)
                .ok_or_else(|| QwkError::UnknownLabel((*name).to_string()))
        })
        .collect()
}

pub fn tensor_product(a: &DensityOperator, b: &DensityOperator) -> Result<DensityOperator> {
    let system = concat_systems(&a.system, &b.system)?;
    Ok(DensityOperator {
        system,
        matrix: kron(&a.matrix, &b.matrix),
    })
}

/// Trace out every factor not named in `keep`. Kept factors stay in their
/// original order.
pub fn partial_trace(rho: &DensityOperator, keep: &[&str]) -> Result<DensityOperator> {
    let pos = positions(&rho.system, keep)?;
    let m = partial_trace_matrix(&rho.matrix, &rho.dims(), &pos);
    let mut sorted = pos;
    sorted.sort_unstable();
    sorted.dedup();
    let system = sorted.iter().map(|&i| rho.system[i].clone()).collect();
    Ok(DensityOperator {
        system,
        matrix: m,
    })
}

/// Canonical purification `Σ √λᵢ |vᵢ⟩|i⟩` into `ancilla`.
pub fn purify(rho: &DensityOperator, ancilla: HilbertLabel) -> Result<PureState> {
    let es = eigh_unchecked(&rho.matrix);
    let rank = es.values.iter().filter(|&&l| l > 1e-12).count();
    if ancilla.dim < rank {
        return Err(QwkError::AncillaTooSmall {
            ancilla: ancilla.dim,
            rank,
        });
    }
    let da = ancilla.dim;
    let mut v = CVec::zeros(rho.dim() * da);
    let mut slot = 0usize;
    for (i, &l) in es.values.iter().enumerate() {
        if l <= 1e-12 {
            continue;
        }
        let vi = es.vectors.column(i);
        let a = ket(da, slot);
        v += kron_vec(&vi.into_owned(), &a) * cr(l.sqrt());
        slot += 1;
    }
    let n = v.norm();
    v /= cr(n);
    let mut system = rho.system.clone();
    system.push(ancilla);
    PureState::new(system, v)
}

// ---------------------------------------------------------------------------
// Random instances (tests, verification suites, benches)

pub mod random {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
        CMat::from_fn(rows, cols, |_, _| {
            c(rng.sample(StandardNormal), rng.sample(StandardNormal))
        })
    }

    /// Haar unitary via QR with phase correction.
    pub fn unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMat {
        let g = ginibre(d, d, rng);
        let qr = g.qr();
        let mut q = qr.q();
        let r = qr.r();
        for j in 0..d {
            let rjj = r[(j, j)];
            let ph = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { cr(1.0) };
            let col = q.column(j) * ph;
            q.set_column(j, &col);
        }
        q
    }

    /// Random density matrix of the given rank (induced measure).
    pub fn density_matrix<R: Rng + ?Sized>(d: usize, rank: usize, rng: &mut R) -> CMat {
        let g = ginibre(d, rank.max(1), rng);
        let m = &g * g.adjoint();
        let t = m.trace();
        hermitize(&(m / t))
    }

    pub fn density<R: Rng + ?Sized>(name: &str, d: usize, rank: usize, rng: &mut R) -> DensityOperator {
        DensityOperator::from_parts_unchecked(
            vec![HilbertLabel::new(name, d)],
            density_matrix(d, rank, rng),
        )
    }

    pub fn pure_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CVec {
        let g = ginibre(d, 1, rng);
        let v = g.column(0).into_owned();
        let n = v.norm();
        v / cr(n)
    }

    pub fn hermitian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMat {
        hermitize(&ginibre(d, d, rng))
    }
}
