//! Surface-plasmon grating-coupling resonances of a square hole array.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;

use super::{ArrayGeometry, PermittivityTable, SpectrumError};
use crate::scalar::{lit, to_f64, Scalar};

/// Dielectric on the side of the film carrying the SPP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Interface {
    Air,
    Glass,
}

impl Interface {
    pub fn permittivity<T: Scalar>(&self) -> T {
        match self {
            Interface::Air => T::one(),
            Interface::Glass => lit(2.25),
        }
    }
}

impl FromStr for Interface {
    type Err = SpectrumError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "air" => Ok(Interface::Air),
            "glass" => Ok(Interface::Glass),
            other => Err(SpectrumError::Parameter(format!("unknown interface `{other}`"))),
        }
    }
}

impl fmt::Display for Interface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Interface::Air => "air",
            Interface::Glass => "glass",
        })
    }
}

/// TM: plane of incidence along x, so k∥ = k₀ sinθ x̂. TE: plane of
/// incidence along y, k∥ = k₀ sinθ ŷ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarization {
    Tm,
    Te,
}

impl FromStr for Polarization {
    type Err = SpectrumError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tm" => Ok(Polarization::Tm),
            "te" => Ok(Polarization::Te),
            other => Err(SpectrumError::Parameter(format!("unknown polarization `{other}`"))),
        }
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarization::Tm => "TM",
            Polarization::Te => "TE",
        })
    }
}

/// Effective SPP index Re √(ε_m ε_d / (ε_m + ε_d)).
fn spp_index<T: Scalar>(eps_metal: Complex<T>, eps_dielectric: T) -> T {
    let ed = Complex::new(eps_dielectric, T::zero());
    (eps_metal * ed / (eps_metal + ed)).sqrt().re
}

/// λ/p for a given SPP index, or `None` when the order cannot couple.
///
/// With x = λ/p and s = sinθ the coupling condition
/// |k∥ + iG x̂ + jG ŷ| = k₀ n_spp becomes
/// (i² + j²) x² + 2 s c x + s² − n² = 0, where c is the order index along k∥.
fn coupling_ratio<T: Scalar>(n: T, sin_theta: T, i: i32, j: i32, pol: Polarization) -> Option<T> {
    let a = lit::<T>((i * i + j * j) as f64);
    let c = lit::<T>(match pol {
        Polarization::Tm => i,
        Polarization::Te => j,
    } as f64);
    let s = sin_theta;
    let disc = s * s * c * c - a * (s * s - n * n);
    if disc < T::zero() {
        return None;
    }
    let x = (-s * c + disc.sqrt()) / a;
    (x > T::zero()).then_some(x)
}

/// Resonance wavelength (nm) of one grating order: the solution of
/// λ = p·x(n_spp(λ)) nearest above the dielectric light line, bracketed by
/// a 0.5 nm scan and refined by bisection to 1e-12 relative width.
///
/// The root always lies to the red of the light-line wavelength since
/// n_spp > √ε_d. Orders without a root inside the permittivity table
/// (short-wavelength orders on air, or where Re ε_m > −ε_d so no bound
/// SPP exists) are reported as [`SpectrumError::NoResonance`].
pub fn spp_resonance_wavelength<T: Scalar>(
    geom: &ArrayGeometry<T>,
    perm: &PermittivityTable<T>,
    interface: Interface,
    theta_deg: T,
    pol: Polarization,
    order: (i32, i32),
) -> Result<T, SpectrumError> {
    let (i, j) = order;
    if i == 0 && j == 0 {
        return Err(SpectrumError::Parameter("order (0, 0) does not couple to SPPs".into()));
    }
    let no = |reason: String| SpectrumError::NoResonance { i, j, reason };
    let eps_d = interface.permittivity::<T>();
    let s = theta_deg.to_radians().sin();
    let (lo, hi) = perm.domain();
    let outside = || no(format!("no resonance within the permittivity table ({} to {} nm)", to_f64(lo), to_f64(hi)));

    // g(λ) = p·x(n_spp(λ)) − λ; None where the order cannot couple.
    let g = |lambda: T| -> Option<T> {
        let n = spp_index(perm.eval(lambda).ok()?, eps_d);
        coupling_ratio(n, s, i, j, pol).map(|x| x * geom.pitch - lambda)
    };

    let start = coupling_ratio(eps_d.sqrt(), s, i, j, pol)
        .map(|x| x * geom.pitch)
        .ok_or_else(|| no("no real root at the light line".into()))?;
    if start > hi {
        return Err(outside());
    }
    let mut a = start.max(lo);
    let mut ga = g(a);
    if start < lo && ga.is_some_and(|v| v < T::zero()) {
        return Err(outside());
    }
    let step = lit::<T>(0.5);
    while a < hi {
        let b = (a + step).min(hi);
        let gb = g(b);
        if let (Some(fa), Some(fb)) = (ga, gb) {
            if fa == T::zero() {
                return Ok(a);
            }
            if fa.signum() != fb.signum() {
                if let Some(root) = bisect(&g, a, b, fa) {
                    return Ok(root);
                }
            }
        }
        a = b;
        ga = gb;
    }
    Err(outside())
}

/// Root of `g` in a sign-changing bracket, or `None` when the sign change
/// is a jump rather than a zero.
fn bisect<T: Scalar>(g: &impl Fn(T) -> Option<T>, mut a: T, mut b: T, mut fa: T) -> Option<T> {
    for _ in 0..200 {
        let m = (a + b) * lit::<T>(0.5);
        let fm = g(m)?;
        if fm == T::zero() {
            return Some(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
        if b - a <= lit::<T>(1e-12) * a.abs().max(T::one()) || b - a <= T::epsilon() * a.abs() * lit::<T>(4.0) {
            break;
        }
    }
    let m = (a + b) * lit::<T>(0.5);
    (g(m)?.abs() <= lit::<T>(1e-6) * m).then_some(m)
}

/// Resonance wavelengths for several orders, in the order given.
pub fn spp_resonance_wavelengths<T: Scalar>(
    geom: &ArrayGeometry<T>,
    perm: &PermittivityTable<T>,
    interface: Interface,
    theta_deg: T,
    pol: Polarization,
    orders: &[(i32, i32)],
) -> Result<Vec<T>, SpectrumError> {
    if orders.is_empty() {
        return Err(SpectrumError::Parameter("at least one diffraction order is required".into()));
    }
    orders
        .iter()
        .map(|&o| spp_resonance_wavelength(geom, perm, interface, theta_deg, pol, o))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn setup() -> (ArrayGeometry<f64>, PermittivityTable<f64>) {
        (ArrayGeometry::fabricated(), PermittivityTable::gold())
    }

    #[test]
    fn normal_incidence_fourfold_degeneracy() {
        let (g, p) = setup();
        for iface in [Interface::Air, Interface::Glass] {
            let l = spp_resonance_wavelengths(&g, &p, iface, 0.0, Polarization::Tm, &[(1, 0), (-1, 0), (0, 1), (0, -1)]).unwrap();
            for w in &l[1..] {
                assert_relative_eq!(*w, l[0], max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn solution_satisfies_coupling_condition() {
        let (g, p) = setup();
        let lambda = spp_resonance_wavelength(&g, &p, Interface::Glass, 7.0, Polarization::Tm, (-1, 0)).unwrap();
        let n = spp_index(p.eval(lambda).unwrap(), 2.25);
        let k0 = 2.0 * std::f64::consts::PI / lambda;
        let gv = 2.0 * std::f64::consts::PI / g.pitch;
        let kx = k0 * 7f64.to_radians().sin() - gv;
        assert_relative_eq!(kx.abs(), k0 * n, max_relative = 1e-8);
    }

    #[test]
    fn glass_resonance_is_redder_than_air() {
        let (g, p) = setup();
        let air = spp_resonance_wavelength(&g, &p, Interface::Air, 0.0, Polarization::Tm, (1, 0)).unwrap();
        let glass = spp_resonance_wavelength(&g, &p, Interface::Glass, 0.0, Polarization::Tm, (1, 0)).unwrap();
        assert!(glass > air, "{glass} vs {air}");
    }

    #[test]
    fn zero_order_rejected() {
        let (g, p) = setup();
        assert!(spp_resonance_wavelength(&g, &p, Interface::Air, 0.0, Polarization::Tm, (0, 0)).is_err());
        assert!(spp_resonance_wavelengths(&g, &p, Interface::Air, 0.0, Polarization::Tm, &[]).is_err());
    }

    #[test]
    fn out_of_table_reports_order() {
        let (_, p) = setup();
        let big = ArrayGeometry::new(3000.0, 200.0, 100.0, 0.0).unwrap();
        match spp_resonance_wavelength(&big, &p, Interface::Glass, 0.0, Polarization::Tm, (1, 0)) {
            Err(SpectrumError::NoResonance { i: 1, j: 0, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}
