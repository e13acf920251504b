use std::io::{Read, Write};

use super::{ParticleTrajectoryTape, RteConfig};
use crate::error::{ensure, Result};
use crate::io::{read_f64, read_header, read_u64, write_f64, write_header, write_u64};
use crate::scalar::Real;

const MAGIC: &[u8; 8] = b"ADJMCRTE";
const VERSION: u32 = 1;

/// Writes the tape as little-endian binary behind a versioned header
/// (N, M, Δt, domain, seed). Values are widened to f64.
pub fn write_tape<T: Real, W: Write>(tape: &ParticleTrajectoryTape<T>, mut w: W) -> Result<()> {
    write_header(&mut w, MAGIC, VERSION)?;
    let c = &tape.config;
    write_u64(&mut w, tape.n as u64)?;
    write_u64(&mut w, c.steps as u64)?;
    for x in [c.dt, c.x_lo, c.x_hi, c.v_lo, c.v_hi, c.mass] {
        write_f64(&mut w, x)?;
    }
    write_u64(&mut w, tape.seed)?;
    write_u64(&mut w, tape.first_index)?;
    write_u64(&mut w, c.n_particles as u64)?;
    for arr in [&tape.x, &tape.v, &tape.alpha] {
        for x in arr.iter() {
            write_f64(&mut w, x.wide())?;
        }
    }
    let flags: Vec<u8> = tape.scattered.iter().map(|&s| s as u8).collect();
    w.write_all(&flags)?;
    w.flush()?;
    Ok(())
}

pub fn read_tape<T: Real, R: Read>(mut r: R) -> Result<ParticleTrajectoryTape<T>> {
    read_header(&mut r, MAGIC, VERSION)?;
    let n = read_u64(&mut r)? as usize;
    let steps = read_u64(&mut r)? as usize;
    let mut f = [0.0; 6];
    for x in f.iter_mut() {
        *x = read_f64(&mut r)?;
    }
    let seed = read_u64(&mut r)?;
    let first_index = read_u64(&mut r)?;
    let n_particles = read_u64(&mut r)? as usize;
    let config = RteConfig {
        dt: f[0],
        x_lo: f[1],
        x_hi: f[2],
        v_lo: f[3],
        v_hi: f[4],
        mass: f[5],
        steps,
        n_particles,
    };
    config.validate()?;
    ensure!(
        n.checked_mul(steps + 1).is_some_and(|c| c < (1 << 40)),
        Format,
        "implausible tape size {n} x {steps}"
    );
    let mut read_vec = |len: usize| -> Result<Vec<T>> { (0..len).map(|_| Ok(T::lit(read_f64(&mut r)?))).collect() };
    let x = read_vec(n * (steps + 1))?;
    let v = read_vec(n * (steps + 1))?;
    let alpha = read_vec(n * steps)?;
    let mut flags = vec![0u8; n * steps];
    r.read_exact(&mut flags)?;
    ensure!(flags.iter().all(|&b| b <= 1), Format, "scatter flags must be 0 or 1");
    Ok(ParticleTrajectoryTape {
        config,
        seed,
        first_index,
        n,
        x,
        v,
        scattered: flags.into_iter().map(|b| b == 1).collect(),
        alpha,
    })
}

/// Final-time particle states, one row per particle.
pub fn write_final_marginals_csv<T: Real, W: Write>(tape: &ParticleTrajectoryTape<T>, mut w: W) -> Result<()> {
    writeln!(w, "# t={:.16e}", tape.config.t_final())?;
    writeln!(w, "# seed={}", tape.seed)?;
    writeln!(w, "particle,x,v")?;
    for n in 0..tape.n {
        let (x, v) = tape.final_state(n);
        writeln!(w, "{},{:.16e},{:.16e}", tape.first_index + n as u64, x.wide(), v.wide())?;
    }
    Ok(())
}
