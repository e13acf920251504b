use std::io::{Read, Write};

use super::forward::{CollisionTape, Outcome, PairRecord, StepRecord, VelocityEnsemble};
use super::kernel::KernelKind;
use super::Vec3;
use crate::error::{ensure, Error, Result};
use crate::io::{read_f64, read_header, read_u64, write_f64, write_header, write_u64};
use crate::scalar::Real;

const MAGIC: &[u8; 8] = b"ADJMCDSM";
const VERSION: u32 = 1;

fn write_vec3<T: Real, W: Write>(w: &mut W, v: Vec3<T>) -> Result<()> {
    for x in v.to_f64() {
        write_f64(w, x)?;
    }
    Ok(())
}

fn read_vec3<T: Real, R: Read>(r: &mut R) -> Result<Vec3<T>> {
    Ok(Vec3::from_f64([read_f64(r)?, read_f64(r)?, read_f64(r)?]))
}

/// Binary tape with a versioned header (N, M, Δt, kernel, seed).
pub fn write_collision_tape<T: Real, W: Write>(tape: &CollisionTape<T>, mut w: W) -> Result<()> {
    write_header(&mut w, MAGIC, VERSION)?;
    write_u64(&mut w, tape.n as u64)?;
    write_u64(&mut w, tape.steps.len() as u64)?;
    write_f64(&mut w, tape.dt)?;
    write_f64(&mut w, tape.mass)?;
    write_u64(&mut w, tape.seed)?;
    write_u64(&mut w, tape.bound_refreshes as u64)?;
    match &tape.kernel {
        KernelKind::Maxwellian => w.write_all(&[0])?,
        KernelKind::Vhs { c, beta } => {
            w.write_all(&[1])?;
            write_f64(&mut w, *c)?;
            write_f64(&mut w, *beta)?;
        }
        KernelKind::Custom(name) => {
            w.write_all(&[2])?;
            write_u64(&mut w, name.len() as u64)?;
            w.write_all(name.as_bytes())?;
        }
    }
    for step in &tape.steps {
        write_f64(&mut w, step.mu)?;
        write_f64(&mut w, step.sigma_bound)?;
        write_u64(&mut w, step.pairs.len() as u64)?;
        for p in &step.pairs {
            w.write_all(&p.first.to_le_bytes())?;
            w.write_all(&p.second.to_le_bytes())?;
            write_vec3(&mut w, p.sphere)?;
            write_vec3(&mut w, p.alpha)?;
            write_f64(&mut w, p.q.wide())?;
            w.write_all(&[(p.outcome == Outcome::Real) as u8])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_collision_tape<T: Real, R: Read>(mut r: R) -> Result<CollisionTape<T>> {
    read_header(&mut r, MAGIC, VERSION)?;
    let n = read_u64(&mut r)? as usize;
    let steps = read_u64(&mut r)? as usize;
    let dt = read_f64(&mut r)?;
    let mass = read_f64(&mut r)?;
    let seed = read_u64(&mut r)?;
    let bound_refreshes = read_u64(&mut r)? as usize;
    let mut tag = [0u8; 1];
    r.read_exact(&mut tag)?;
    let kernel = match tag[0] {
        0 => KernelKind::Maxwellian,
        1 => KernelKind::Vhs { c: read_f64(&mut r)?, beta: read_f64(&mut r)? },
        2 => {
            let len = read_u64(&mut r)? as usize;
            ensure!(len < 1 << 16, Format, "kernel name too long");
            let mut b = vec![0u8; len];
            r.read_exact(&mut b)?;
            KernelKind::Custom(String::from_utf8(b).map_err(|e| Error::Format(e.to_string()))?)
        }
        t => return Err(Error::Format(format!("unknown kernel tag {t}"))),
    };
    let mut tape = CollisionTape::new(n, dt, mass, seed, kernel);
    tape.bound_refreshes = bound_refreshes;
    for _ in 0..steps {
        let mu = read_f64(&mut r)?;
        let sigma_bound = read_f64(&mut r)?;
        let np = read_u64(&mut r)? as usize;
        ensure!(2 * np <= n, Format, "{np} pairs in a step of {n} particles");
        let mut pairs = Vec::with_capacity(np);
        for _ in 0..np {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            let first = u32::from_le_bytes(b);
            r.read_exact(&mut b)?;
            let second = u32::from_le_bytes(b);
            let sphere = read_vec3(&mut r)?;
            let alpha = read_vec3(&mut r)?;
            let q = T::lit(read_f64(&mut r)?);
            let mut o = [0u8; 1];
            r.read_exact(&mut o)?;
            let outcome = match o[0] {
                1 => Outcome::Real,
                0 => Outcome::VirtualOnly,
                x => return Err(Error::Format(format!("unknown outcome {x}"))),
            };
            pairs.push(PairRecord { first, second, sphere, alpha, q, outcome });
        }
        tape.steps.push(StepRecord { mu, sigma_bound, pairs });
    }
    Ok(tape)
}

/// Header for [`write_moment_row`]: `t,T_x,T_y,T_z,m4x`.
pub const MOMENTS_HEADER: &str = "t,T_x,T_y,T_z,m4x";

pub fn write_moment_row<T: Real, W: Write>(mut w: W, t: f64, ensemble: &VelocityEnsemble<T>) -> Result<()> {
    let temp = ensemble.temperatures();
    writeln!(
        w,
        "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
        t,
        temp[0],
        temp[1],
        temp[2],
        ensemble.fourth_moment_x()
    )?;
    Ok(())
}
