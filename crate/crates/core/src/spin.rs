//! Dense operator algebra for `N` spin-1/2 particles.
//!
//! Product-basis convention: site 0 is the leftmost (most significant) tensor
//! factor and each factor is ordered `(|up>, |down>)`, so `I_z` of a single
//! spin is `diag(1/2, -1/2)`.

use std::fmt;
use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex;

use crate::error::{arg, Error, Result};
use crate::scalar::{cplx, lit, Real};

/// Cartesian axis of a spin operator or rotation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        })
    }
}

/// Dense complex `2^N x 2^N` matrix: Hamiltonian, propagator or density
/// deviation depending on context.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix<T: Real> {
    m: DMatrix<Complex<T>>,
}

impl<T: Real> OperatorMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            m: DMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            m: DMatrix::identity(dim, dim),
        }
    }

    /// Wraps a square matrix whose dimension is a power of two.
    pub fn from_matrix(m: DMatrix<Complex<T>>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(arg(format!("operator must be square, got {}x{}", m.nrows(), m.ncols())));
        }
        if !m.nrows().is_power_of_two() {
            return Err(arg(format!("operator dimension {} is not a power of two", m.nrows())));
        }
        Ok(Self { m })
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        debug_assert!(dim.is_power_of_two());
        Self {
            m: DMatrix::from_fn(dim, dim, f),
        }
    }

    /// Diagonal operator from real entries.
    pub fn from_diagonal(diag: &[T]) -> Self {
        let n = diag.len();
        Self::from_fn(n, |i, j| {
            if i == j {
                cplx(diag[i], T::zero())
            } else {
                Complex::new(T::zero(), T::zero())
            }
        })
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    /// Number of spins encoded by the dimension.
    pub fn n_spins(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn matrix(&self) -> &DMatrix<Complex<T>> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<Complex<T>> {
        self.m
    }

    pub fn adjoint(&self) -> Self {
        Self {
            m: self.m.adjoint(),
        }
    }

    pub fn trace(&self) -> Complex<T> {
        self.m.trace()
    }

    pub fn frobenius_norm(&self) -> T {
        self.m
            .iter()
            .fold(T::zero(), |acc, z| acc + z.norm_sqr())
            .sqrt()
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            m: self.m.map(|z| z * s),
        }
    }

    pub fn scale_complex(&self, s: Complex<T>) -> Self {
        Self {
            m: self.m.map(|z| z * s),
        }
    }

    /// `self += s * other`, the workhorse of Hamiltonian assembly.
    pub fn add_scaled(&mut self, s: T, other: &Self) {
        debug_assert_eq!(self.dim(), other.dim());
        self.m.zip_apply(&other.m, |a, b| *a += b * s);
    }

    pub fn commutator(&self, other: &Self) -> Self {
        Self {
            m: &self.m * &other.m - &other.m * &self.m,
        }
    }

    /// Hilbert-Schmidt inner product `Tr{A^dagger B}`.
    pub fn inner(&self, other: &Self) -> Complex<T> {
        self.m
            .iter()
            .zip(other.m.iter())
            .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a.conj() * b)
    }

    /// `Tr{A B}` without forming the product.
    pub fn trace_product(&self, other: &Self) -> Complex<T> {
        let n = self.dim();
        let mut acc = Complex::new(T::zero(), T::zero());
        for i in 0..n {
            for k in 0..n {
                acc += self.m[(i, k)] * other.m[(k, i)];
            }
        }
        acc
    }

    /// Frobenius distance `||A - B||_F`.
    pub fn distance(&self, other: &Self) -> T {
        self.m
            .iter()
            .zip(other.m.iter())
            .fold(T::zero(), |acc, (a, b)| acc + (a - b).norm_sqr())
            .sqrt()
    }

    /// `||A - A^dagger||_F`.
    pub fn hermiticity_error(&self) -> T {
        let n = self.dim();
        let mut acc = T::zero();
        for i in 0..n {
            for j in 0..n {
                acc += (self.m[(i, j)] - self.m[(j, i)].conj()).norm_sqr();
            }
        }
        acc.sqrt()
    }

    /// Hermitian to within `rel_tol` relative to the operator norm.
    pub fn is_hermitian(&self, rel_tol: T) -> bool {
        self.hermiticity_error() <= rel_tol * self.frobenius_norm().max(T::one())
    }

    /// `||U U^dagger - 1||_F`.
    pub fn unitarity_error(&self) -> T {
        let prod = &self.m * self.m.adjoint();
        let id = DMatrix::<Complex<T>>::identity(self.dim(), self.dim());
        OperatorMatrix { m: prod }.distance(&OperatorMatrix { m: id })
    }

    /// `U A U^dagger`.
    pub fn conjugate_by(&self, u: &Self) -> Self {
        Self {
            m: &u.m * &self.m * u.m.adjoint(),
        }
    }

    /// Kronecker product `self (x) other`, `self` being the leftmost factor.
    pub fn kron(&self, other: &Self) -> Self {
        Self {
            m: self.m.kronecker(&other.m),
        }
    }
}

impl<T: Real> Index<(usize, usize)> for OperatorMatrix<T> {
    type Output = Complex<T>;
    fn index(&self, idx: (usize, usize)) -> &Complex<T> {
        &self.m[idx]
    }
}

impl<'a, T: Real> Add<&'a OperatorMatrix<T>> for &'a OperatorMatrix<T> {
    type Output = OperatorMatrix<T>;
    fn add(self, rhs: Self) -> OperatorMatrix<T> {
        OperatorMatrix { m: &self.m + &rhs.m }
    }
}

impl<T: Real> Add for OperatorMatrix<T> {
    type Output = OperatorMatrix<T>;
    fn add(self, rhs: Self) -> OperatorMatrix<T> {
        OperatorMatrix { m: self.m + rhs.m }
    }
}

impl<T: Real> AddAssign<&OperatorMatrix<T>> for OperatorMatrix<T> {
    fn add_assign(&mut self, rhs: &OperatorMatrix<T>) {
        self.m += &rhs.m;
    }
}

impl<'a, T: Real> Sub<&'a OperatorMatrix<T>> for &'a OperatorMatrix<T> {
    type Output = OperatorMatrix<T>;
    fn sub(self, rhs: Self) -> OperatorMatrix<T> {
        OperatorMatrix { m: &self.m - &rhs.m }
    }
}

impl<T: Real> Sub for OperatorMatrix<T> {
    type Output = OperatorMatrix<T>;
    fn sub(self, rhs: Self) -> OperatorMatrix<T> {
        OperatorMatrix { m: self.m - rhs.m }
    }
}

impl<'a, T: Real> Mul<&'a OperatorMatrix<T>> for &'a OperatorMatrix<T> {
    type Output = OperatorMatrix<T>;
    fn mul(self, rhs: Self) -> OperatorMatrix<T> {
        OperatorMatrix { m: &self.m * &rhs.m }
    }
}

impl<T: Real> Mul for OperatorMatrix<T> {
    type Output = OperatorMatrix<T>;
    fn mul(self, rhs: Self) -> OperatorMatrix<T> {
        OperatorMatrix { m: self.m * rhs.m }
    }
}

impl<T: Real> Neg for OperatorMatrix<T> {
    type Output = OperatorMatrix<T>;
    fn neg(self) -> OperatorMatrix<T> {
        OperatorMatrix { m: -self.m }
    }
}

fn check_site(site: usize, n_spins: usize) -> Result<()> {
    if n_spins == 0 {
        return Err(arg("n_spins must be at least 1"));
    }
    if n_spins > 16 {
        return Err(arg(format!("n_spins = {n_spins} exceeds the dense-operator limit of 16")));
    }
    if site >= n_spins {
        return Err(arg(format!("site {site} out of range for {n_spins} spins")));
    }
    Ok(())
}

/// `I_{site,axis}`: half the Pauli matrix on `site`, identity elsewhere.
pub fn spin_operator<T: Real>(axis: Axis, site: usize, n_spins: usize) -> Result<OperatorMatrix<T>> {
    check_site(site, n_spins)?;
    let dim = 1usize << n_spins;
    let mask = 1usize << (n_spins - 1 - site);
    let half = lit::<T>(0.5);
    let zero = Complex::new(T::zero(), T::zero());
    let mut m = DMatrix::from_element(dim, dim, zero);
    for row in 0..dim {
        let down = row & mask != 0;
        match axis {
            Axis::Z => m[(row, row)] = cplx(if down { -half } else { half }, T::zero()),
            Axis::X => m[(row, row ^ mask)] = cplx(half, T::zero()),
            Axis::Y => {
                // <up|Y|down> = -i/2, <down|Y|up> = +i/2
                m[(row, row ^ mask)] = cplx(T::zero(), if down { half } else { -half });
            }
        }
    }
    Ok(OperatorMatrix { m })
}

/// Collective operator `I_axis = sum_k I_{k,axis}`.
pub fn collective_operator<T: Real>(axis: Axis, n_spins: usize) -> Result<OperatorMatrix<T>> {
    check_site(0, n_spins)?;
    let mut acc = OperatorMatrix::zeros(1 << n_spins);
    for site in 0..n_spins {
        acc += &spin_operator(axis, site, n_spins)?;
    }
    Ok(acc)
}

/// Spectral decomposition of a Hermitian generator, reusable for `exp(-i H t)`
/// at many `t`.
#[derive(Clone, Debug)]
pub struct HermitianSpectrum<T: Real> {
    vectors: DMatrix<Complex<T>>,
    values: Vec<T>,
}

impl<T: Real> HermitianSpectrum<T> {
    pub fn new(h: &OperatorMatrix<T>) -> Result<Self> {
        let scale = h.frobenius_norm().max(T::one());
        if h.hermiticity_error() > lit::<T>(1e-10) * scale {
            return Err(Error::Numeric(format!(
                "generator is not Hermitian (||H - H^dagger|| = {:e})",
                h.hermiticity_error()
            )));
        }
        let eig = SymmetricEigen::try_new(h.m.clone(), T::eps(), 10_000)
            .ok_or_else(|| Error::Numeric("Hermitian eigendecomposition did not converge".into()))?;
        Ok(Self {
            vectors: orthonormalize(eig.eigenvectors),
            values: eig.eigenvalues.iter().copied().collect(),
        })
    }

    pub fn eigenvalues(&self) -> &[T] {
        &self.values
    }

    /// `exp(-i H t)`.
    pub fn exp(&self, t: T) -> OperatorMatrix<T> {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &lambda) in self.values.iter().enumerate() {
            let phase = -lambda * t;
            let f = cplx(phase.cos(), phase.sin());
            for i in 0..n {
                scaled[(i, j)] *= f;
            }
        }
        OperatorMatrix {
            m: scaled * self.vectors.adjoint(),
        }
    }
}

/// Two passes of modified Gram-Schmidt over the columns. The QR sweep leaves
/// eigenvectors orthogonal only to a few ulp; without this the error of long
/// step products grows linearly in the step count.
fn orthonormalize<T: Real>(mut v: DMatrix<Complex<T>>) -> DMatrix<Complex<T>> {
    let n = v.ncols();
    for _ in 0..2 {
        for j in 0..n {
            for k in 0..j {
                let proj = v.column(k).dotc(&v.column(j));
                let ck = v.column(k).clone_owned();
                v.column_mut(j).axpy(-proj, &ck, Complex::new(T::one(), T::zero()));
            }
            let norm = v.column(j).norm();
            v.column_mut(j).unscale_mut(norm);
        }
    }
    v
}

/// `exp(-i H t)` for Hermitian `H`, via eigendecomposition.
pub fn expm_skew<T: Real>(h: &OperatorMatrix<T>, t: T) -> Result<OperatorMatrix<T>> {
    if t == T::zero() {
        return Ok(OperatorMatrix::identity(h.dim()));
    }
    Ok(HermitianSpectrum::new(h)?.exp(t))
}

/// `R A R^dagger` with `R = exp(-i angle I_axis)`.
pub fn rotate_operator<T: Real>(
    a: &OperatorMatrix<T>,
    axis: Axis,
    angle: T,
    n_spins: usize,
) -> Result<OperatorMatrix<T>> {
    if a.dim() != 1usize << n_spins {
        return Err(arg(format!(
            "operator dimension {} does not match {} spins",
            a.dim(),
            n_spins
        )));
    }
    let r = expm_skew(&collective_operator(axis, n_spins)?, angle)?;
    Ok(a.conjugate_by(&r))
}

/// Cached single-spin and collective operators for an `N`-spin system.
#[derive(Clone, Debug)]
pub struct SpinBasis<T: Real> {
    n_spins: usize,
    site_ops: Vec<[OperatorMatrix<T>; 3]>,
    collective: [OperatorMatrix<T>; 3],
}

impl<T: Real> SpinBasis<T> {
    pub fn new(n_spins: usize) -> Result<Self> {
        let mut site_ops = Vec::with_capacity(n_spins);
        for site in 0..n_spins {
            site_ops.push([
                spin_operator(Axis::X, site, n_spins)?,
                spin_operator(Axis::Y, site, n_spins)?,
                spin_operator(Axis::Z, site, n_spins)?,
            ]);
        }
        Ok(Self {
            n_spins,
            site_ops,
            collective: [
                collective_operator(Axis::X, n_spins)?,
                collective_operator(Axis::Y, n_spins)?,
                collective_operator(Axis::Z, n_spins)?,
            ],
        })
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn dim(&self) -> usize {
        1 << self.n_spins
    }

    pub fn site(&self, axis: Axis, site: usize) -> &OperatorMatrix<T> {
        &self.site_ops[site][axis_index(axis)]
    }

    pub fn total(&self, axis: Axis) -> &OperatorMatrix<T> {
        &self.collective[axis_index(axis)]
    }
}

fn axis_index(axis: Axis) -> usize {
    match axis {
        Axis::X => 0,
        Axis::Y => 1,
        Axis::Z => 2,
    }
}
