//! Spectral vector and scalar fields on a [`FrequencyLattice`].

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::lattice::FrequencyLattice;

pub type Vec3 = [Complex64; 3];

const ZERO3: Vec3 = [Complex64::new(0.0, 0.0); 3];

pub(crate) fn vec_norm(v: &Vec3) -> f64 {
    (v[0].norm_sqr() + v[1].norm_sqr() + v[2].norm_sqr()).sqrt()
}

fn dot_k(k: [i32; 3], v: &Vec3) -> Complex64 {
    v[0] * k[0] as f64 + v[1] * k[1] as f64 + v[2] * k[2] as f64
}

/// Fourier coefficients `û(k) ∈ ℂ³` of a real, mean-free vector field.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralVectorField {
    lattice: FrequencyLattice,
    coeffs: Vec<Vec3>,
}

impl SpectralVectorField {
    pub fn zeros(lattice: &FrequencyLattice) -> Self {
        Self {
            lattice: lattice.clone(),
            coeffs: vec![ZERO3; lattice.len()],
        }
    }

    /// Wraps raw coefficients in canonical mode order. Panics on a length
    /// mismatch; symmetry is not enforced.
    pub fn from_coeffs(lattice: &FrequencyLattice, coeffs: Vec<Vec3>) -> Self {
        assert_eq!(coeffs.len(), lattice.len(), "coefficient count");
        Self {
            lattice: lattice.clone(),
            coeffs,
        }
    }

    pub fn lattice(&self) -> &FrequencyLattice {
        &self.lattice
    }

    pub fn coeffs(&self) -> &[Vec3] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Vec3] {
        &mut self.coeffs
    }

    pub fn get(&self, k: [i32; 3]) -> Option<Vec3> {
        self.lattice.index_of(k).map(|i| self.coeffs[i])
    }

    /// Sets `û(k)` and `û(-k) = conj(û(k))` together.
    pub fn set_pair(&mut self, k: [i32; 3], value: Vec3) {
        let i = self
            .lattice
            .index_of(k)
            .expect("mode outside the lattice");
        let j = self.lattice.conjugate(i);
        self.coeffs[i] = value;
        self.coeffs[j] = value.map(|c| c.conj());
    }

    pub fn component(&self, c: usize) -> ScalarField {
        ScalarField {
            lattice: self.lattice.clone(),
            coeffs: self.coeffs.iter().map(|v| v[c]).collect(),
        }
    }

    pub fn from_components(parts: [ScalarField; 3]) -> Result<Self> {
        parts[0].lattice.check_same(&parts[1].lattice)?;
        parts[0].lattice.check_same(&parts[2].lattice)?;
        let coeffs = (0..parts[0].coeffs.len())
            .map(|i| [parts[0].coeffs[i], parts[1].coeffs[i], parts[2].coeffs[i]])
            .collect();
        Ok(Self {
            lattice: parts[0].lattice.clone(),
            coeffs,
        })
    }

    /// Largest per-mode magnitude `|û(k)|`.
    pub fn max_magnitude(&self) -> f64 {
        self.coeffs.iter().map(vec_norm).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|v| v.iter().all(|c| *c == Complex64::new(0.0, 0.0)))
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map_modes(|_, v| v.map(|c| c * s))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// `self + s * other`
    pub fn axpy(&self, s: f64, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b * s)
    }

    /// Laplacian as the multiplier `-|k|^2`.
    pub fn laplacian(&self) -> Self {
        let r2 = self.lattice.radii_sq().to_vec();
        self.map_modes(|i, v| v.map(|c| c * -r2[i]))
    }

    /// Largest `|û(k) - conj(û(-k))|` over all modes.
    pub fn hermitian_defect(&self) -> f64 {
        (0..self.coeffs.len())
            .map(|i| {
                let j = self.lattice.conjugate(i);
                let a = self.coeffs[i];
                let b = self.coeffs[j];
                vec_norm(&[a[0] - b[0].conj(), a[1] - b[1].conj(), a[2] - b[2].conj()])
            })
            .fold(0.0, f64::max)
    }

    pub(crate) fn map_modes(&self, f: impl Fn(usize, &Vec3) -> Vec3) -> Self {
        Self {
            lattice: self.lattice.clone(),
            coeffs: self.coeffs.iter().enumerate().map(|(i, v)| f(i, v)).collect(),
        }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        self.lattice.check_same(&other.lattice)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| [f(a[0], b[0]), f(a[1], b[1]), f(a[2], b[2])])
            .collect();
        Ok(Self {
            lattice: self.lattice.clone(),
            coeffs,
        })
    }
}

/// Fourier coefficients of a real, mean-free scalar field.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    lattice: FrequencyLattice,
    coeffs: Vec<Complex64>,
}

impl ScalarField {
    pub fn zeros(lattice: &FrequencyLattice) -> Self {
        Self {
            lattice: lattice.clone(),
            coeffs: vec![Complex64::new(0.0, 0.0); lattice.len()],
        }
    }

    pub fn from_coeffs(lattice: &FrequencyLattice, coeffs: Vec<Complex64>) -> Self {
        assert_eq!(coeffs.len(), lattice.len(), "coefficient count");
        Self {
            lattice: lattice.clone(),
            coeffs,
        }
    }

    pub fn lattice(&self) -> &FrequencyLattice {
        &self.lattice
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn get(&self, k: [i32; 3]) -> Option<Complex64> {
        self.lattice.index_of(k).map(|i| self.coeffs[i])
    }

    pub fn set_pair(&mut self, k: [i32; 3], value: Complex64) {
        let i = self
            .lattice
            .index_of(k)
            .expect("mode outside the lattice");
        let j = self.lattice.conjugate(i);
        self.coeffs[i] = value;
        self.coeffs[j] = value.conj();
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == Complex64::new(0.0, 0.0))
    }

    pub fn max_magnitude(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// Averages each conjugate pair so that `û(-k) = conj(û(k))`.
pub fn enforce_hermitian(f: &SpectralVectorField) -> SpectralVectorField {
    let lat = f.lattice();
    f.map_modes(|i, v| {
        let w = f.coeffs[lat.conjugate(i)];
        // (a + a) / 2 == a exactly, so symmetric input is returned bitwise.
        let avg = |a: Complex64, b: Complex64| (a + b.conj()) * 0.5;
        [avg(v[0], w[0]), avg(v[1], w[1]), avg(v[2], w[2])]
    })
}

/// Per-mode orthogonal projection `û ↦ û - k (k·û)/|k|²`.
pub fn leray_project(f: &SpectralVectorField) -> SpectralVectorField {
    let lat = f.lattice().clone();
    f.map_modes(|i, v| project_mode(lat.mode(i), lat.radii_sq()[i], v))
}

pub(crate) fn project_mode(k: [i32; 3], k2: f64, v: &Vec3) -> Vec3 {
    let d = dot_k(k, v) / k2;
    [
        v[0] - d * k[0] as f64,
        v[1] - d * k[1] as f64,
        v[2] - d * k[2] as f64,
    ]
}

/// `max_k |k·û(k)|`.
pub fn divergence_residual(f: &SpectralVectorField) -> f64 {
    let lat = f.lattice();
    f.coeffs()
        .iter()
        .enumerate()
        .map(|(i, v)| dot_k(lat.mode(i), v).norm())
        .fold(0.0, f64::max)
}

/// Deterministic random divergence-free field with
/// `|û(k)| <= amplitude * exp(-decay_rate |k|)`.
pub fn random_divfree_field(
    lattice: &FrequencyLattice,
    decay_rate: f64,
    amplitude: f64,
    seed: u64,
) -> SpectralVectorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SpectralVectorField::zeros(lattice);
    if amplitude == 0.0 {
        return out;
    }
    for i in lattice.positive_half_start()..lattice.len() {
        let k = lattice.mode(i);
        let raw: Vec3 = std::array::from_fn(|_| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let shrink: f64 = rng.gen_range(0.0..1.0);
        let p = project_mode(k, lattice.radii_sq()[i], &raw);
        let n = vec_norm(&p);
        if n == 0.0 {
            continue;
        }
        let s = amplitude * (-decay_rate * lattice.radii()[i]).exp() * shrink / n;
        let mut v = p.map(|c| c * s);
        // Exact orthogonality after scaling.
        v = project_mode(k, lattice.radii_sq()[i], &v);
        out.set_pair(k, v);
    }
    out
}

/// Deterministic random scalar field with `|f̂(k)| <= amplitude * exp(-decay_rate |k|)`.
/// `density` in `(0, 1]` is the fraction of conjugate pairs left nonzero.
pub fn random_scalar_field(
    lattice: &FrequencyLattice,
    decay_rate: f64,
    amplitude: f64,
    density: f64,
    seed: u64,
) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = ScalarField::zeros(lattice);
    for i in lattice.positive_half_start()..lattice.len() {
        let keep: f64 = rng.gen_range(0.0..1.0);
        let z = Complex64::from_polar(rng.gen_range(0.0..1.0), rng.gen_range(0.0..std::f64::consts::TAU));
        if keep >= density {
            continue;
        }
        let s = amplitude * (-decay_rate * lattice.radii()[i]).exp();
        out.set_pair(lattice.mode(i), z * s);
    }
    out
}

/// Taylor-Green vortex `A (sin x cos y cos z, -cos x sin y cos z, 0)`.
pub fn taylor_green(lattice: &FrequencyLattice, amplitude: f64) -> SpectralVectorField {
    let mut out = SpectralVectorField::zeros(lattice);
    let i = Complex64::new(0.0, 1.0);
    for k1 in [-1, 1] {
        for k2 in [-1, 1] {
            for k3 in [-1, 1] {
                let idx = lattice.index_of([k1, k2, k3]).expect("M >= 4");
                out.coeffs[idx] = [
                    -i * (amplitude * k1 as f64 / 8.0),
                    i * (amplitude * k2 as f64 / 8.0),
                    Complex64::new(0.0, 0.0),
                ];
            }
        }
    }
    out
}

/// Shear mode `u = (0, 2A cos x, 0)`: `û(±e₁) = (0, A, 0)`.
pub fn single_mode(lattice: &FrequencyLattice, amplitude: f64) -> SpectralVectorField {
    let mut out = SpectralVectorField::zeros(lattice);
    out.set_pair([1, 0, 0], [
        Complex64::new(0.0, 0.0),
        Complex64::new(amplitude, 0.0),
        Complex64::new(0.0, 0.0),
    ]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn hermitian_averaging() {
        let l = build_lattice(4).unwrap();
        let mut f = SpectralVectorField::zeros(&l);
        let i = l.index_of([1, 0, 0]).unwrap();
        f.coeffs_mut()[i] = [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
        let g = enforce_hermitian(&f);
        assert_eq!(g.get([1, 0, 0]).unwrap()[0], c(0.5, 0.0));
        assert_eq!(g.get([-1, 0, 0]).unwrap()[0], c(0.5, 0.0));
        assert!(g.hermitian_defect() == 0.0);

        let mut h = SpectralVectorField::zeros(&l);
        h.coeffs_mut()[i] = [c(1.0, 2.0), c(0.0, 0.0), c(0.0, 0.0)];
        let h = enforce_hermitian(&h);
        assert_eq!(h.get([1, 0, 0]).unwrap()[0], c(0.5, 1.0));
        assert_eq!(h.get([-1, 0, 0]).unwrap()[0], c(0.5, -1.0));
    }

    #[test]
    fn hermitian_is_idempotent_bitwise() {
        let l = build_lattice(6).unwrap();
        let f = random_divfree_field(&l, 0.3, 1.0, 11);
        assert_eq!(enforce_hermitian(&f), f);
        let z = SpectralVectorField::zeros(&l);
        assert_eq!(enforce_hermitian(&z), z);
    }

    #[test]
    fn leray_closed_forms() {
        let l = build_lattice(4).unwrap();
        let mut f = SpectralVectorField::zeros(&l);
        f.set_pair([1, 0, 0], [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(leray_project(&f).is_zero());

        let mut g = SpectralVectorField::zeros(&l);
        g.set_pair([1, 1, 0], [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let p = leray_project(&g).get([1, 1, 0]).unwrap();
        assert_eq!(p, [c(0.5, 0.0), c(-0.5, 0.0), c(0.0, 0.0)]);

        let mut h = SpectralVectorField::zeros(&l);
        h.set_pair([1, 0, 0], [c(0.0, 0.0), c(3.0, -1.0), c(0.5, 0.0)]);
        assert_eq!(leray_project(&h), h);
    }

    #[test]
    fn divergence_residual_examples() {
        let l = build_lattice(4).unwrap();
        let mut f = SpectralVectorField::zeros(&l);
        f.set_pair([0, 1, 0], [c(0.0, 0.0), c(2.5, 0.0), c(0.0, 0.0)]);
        assert_eq!(divergence_residual(&f), 2.5);
        assert_eq!(divergence_residual(&SpectralVectorField::zeros(&l)), 0.0);
    }

    #[test]
    fn random_field_properties() {
        let l = build_lattice(8).unwrap();
        let a = random_divfree_field(&l, 0.5, 2.0, 42);
        let b = random_divfree_field(&l, 0.5, 2.0, 42);
        assert_eq!(a, b);
        assert_ne!(a, random_divfree_field(&l, 0.5, 2.0, 43));
        assert!(divergence_residual(&a) <= 1e-12 * 2.0);
        assert_eq!(a.hermitian_defect(), 0.0);
        for (i, v) in a.coeffs().iter().enumerate() {
            assert!(vec_norm(v) <= 2.0 * (-0.5 * l.radii()[i]).exp() * (1.0 + 1e-12));
        }
        assert!(random_divfree_field(&l, 0.5, 0.0, 42).is_zero());
    }

    #[test]
    fn taylor_green_is_admissible() {
        let l = build_lattice(4).unwrap();
        let tg = taylor_green(&l, 1.0);
        assert_eq!(divergence_residual(&tg), 0.0);
        assert_eq!(tg.hermitian_defect(), 0.0);
        // sin x cos y cos z carries total |coefficient| 8 * 1/8
        let s: f64 = tg.coeffs().iter().map(|v| v[0].norm()).sum();
        assert!((s - 1.0).abs() < 1e-15);
    }
}
