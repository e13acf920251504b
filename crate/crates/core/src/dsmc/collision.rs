use super::Vec3;
use crate::error::{ensure, Result};
use crate::scalar::Real;

pub type Mat6<T> = [[T; 6]; 6];

const UNIT_TOL: f64 = 1e-10;

fn check_unit<T: Real>(u: Vec3<T>, name: &str) -> Result<()> {
    let n = u.norm().wide();
    ensure!((n - 1.0).abs() <= UNIT_TOL, Argument, "{name} is not a unit vector (|{name}| = {n})");
    Ok(())
}

/// A = ½[[I+σαᵀ, I−σαᵀ],[I−σαᵀ, I+σαᵀ]] and B = Aᵀ.
pub fn collision_matrices<T: Real>(sigma: Vec3<T>, alpha: Vec3<T>) -> Result<(Mat6<T>, Mat6<T>)> {
    check_unit(sigma, "sigma")?;
    check_unit(alpha, "alpha")?;
    let half = T::lit(0.5);
    let mut a = [[T::zero(); 6]; 6];
    for r in 0..3 {
        for c in 0..3 {
            let id = if r == c { T::one() } else { T::zero() };
            let outer = sigma[r] * alpha[c];
            a[r][c] = half * (id + outer);
            a[r][c + 3] = half * (id - outer);
            a[r + 3][c] = half * (id - outer);
            a[r + 3][c + 3] = half * (id + outer);
        }
    }
    let mut b = [[T::zero(); 6]; 6];
    for r in 0..6 {
        for c in 0..6 {
            b[r][c] = a[c][r];
        }
    }
    Ok((a, b))
}

/// Post-collision velocities ½(v+v₁) ± ½|v−v₁|σ.
#[inline]
pub fn collide<T: Real>(v: Vec3<T>, v1: Vec3<T>, sigma: Vec3<T>) -> (Vec3<T>, Vec3<T>) {
    let half = T::lit(0.5);
    let mid = (v + v1).scale(half);
    let d = sigma.scale(half * (v - v1).norm());
    (mid + d, mid - d)
}

/// Action of A(σ, α) on the stacked pair (v, v₁).
#[inline]
pub fn apply_a<T: Real>(sigma: Vec3<T>, alpha: Vec3<T>, v: Vec3<T>, v1: Vec3<T>) -> (Vec3<T>, Vec3<T>) {
    let half = T::lit(0.5);
    let mid = (v + v1).scale(half);
    let d = sigma.scale(half * alpha.dot(v - v1));
    (mid + d, mid - d)
}

/// Action of B(σ, α) = A(σ, α)ᵀ on the stacked pair (w, w₁).
#[inline]
pub fn apply_b<T: Real>(sigma: Vec3<T>, alpha: Vec3<T>, w: Vec3<T>, w1: Vec3<T>) -> (Vec3<T>, Vec3<T>) {
    apply_a(alpha, sigma, w, w1)
}

pub fn mat_vec<T: Real>(m: &Mat6<T>, x: [T; 6]) -> [T; 6] {
    let mut y = [T::zero(); 6];
    for r in 0..6 {
        y[r] = (0..6).map(|c| m[r][c] * x[c]).sum();
    }
    y
}

pub fn stack<T: Real>(v: Vec3<T>, v1: Vec3<T>) -> [T; 6] {
    [v.x, v.y, v.z, v1.x, v1.y, v1.z]
}
