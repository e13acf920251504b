use std::f64::consts::PI;

use super::Vec3;
use crate::error::{ensure, Result};
use crate::scalar::Real;

/// Identifies a kernel in tape headers and reports.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelKind {
    Maxwellian,
    Vhs { c: f64, beta: f64 },
    Custom(String),
}

impl std::fmt::Display for KernelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KernelKind::Maxwellian => write!(f, "maxwellian"),
            KernelKind::Vhs { c, beta } => write!(f, "vhs(c={c},beta={beta})"),
            KernelKind::Custom(name) => write!(f, "custom({name})"),
        }
    }
}

/// Collision kernel q(g, σ) with g the relative velocity v − v₁.
pub trait CollisionKernel<T: Real>: Send + Sync {
    fn evaluate(&self, g: Vec3<T>, sigma: Vec3<T>) -> T;

    /// ∂q/∂g.
    fn gradient(&self, g: Vec3<T>, sigma: Vec3<T>) -> Vec3<T>;

    /// A value Σ with q ≤ Σ for every pair whose relative speed is at most
    /// `max_rel_speed`.
    fn bound(&self, max_rel_speed: T) -> T;

    /// True if [`bound`](Self::bound) does not depend on its argument.
    fn has_fixed_bound(&self) -> bool {
        false
    }

    fn kind(&self) -> KernelKind;
}

/// q ≡ 1/(4π).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Maxwellian;

impl Maxwellian {
    pub const VALUE: f64 = 1.0 / (4.0 * PI);
}

impl<T: Real> CollisionKernel<T> for Maxwellian {
    fn evaluate(&self, _: Vec3<T>, _: Vec3<T>) -> T {
        T::lit(Self::VALUE)
    }

    fn gradient(&self, _: Vec3<T>, _: Vec3<T>) -> Vec3<T> {
        Vec3::zero()
    }

    fn bound(&self, _: T) -> T {
        T::lit(Self::VALUE)
    }

    fn has_fixed_bound(&self) -> bool {
        true
    }

    fn kind(&self) -> KernelKind {
        KernelKind::Maxwellian
    }
}

/// Variable hard spheres, q = C |g|^β.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vhs {
    pub c: f64,
    pub beta: f64,
}

impl Vhs {
    pub fn new(c: f64, beta: f64) -> Result<Self> {
        ensure!(c > 0.0 && c.is_finite(), Argument, "VHS prefactor must be positive");
        ensure!(beta >= 0.0 && beta.is_finite(), Argument, "VHS exponent must be nonnegative");
        Ok(Self { c, beta })
    }
}

impl<T: Real> CollisionKernel<T> for Vhs {
    fn evaluate(&self, g: Vec3<T>, _: Vec3<T>) -> T {
        T::lit(self.c) * g.norm().powf(T::lit(self.beta))
    }

    fn gradient(&self, g: Vec3<T>, _: Vec3<T>) -> Vec3<T> {
        let r = g.norm();
        if r == T::zero() {
            return Vec3::zero();
        }
        g.scale(T::lit(self.c * self.beta) * r.powf(T::lit(self.beta - 2.0)))
    }

    fn bound(&self, max_rel_speed: T) -> T {
        T::lit(self.c) * max_rel_speed.powf(T::lit(self.beta))
    }

    fn kind(&self) -> KernelKind {
        KernelKind::Vhs { c: self.c, beta: self.beta }
    }
}
