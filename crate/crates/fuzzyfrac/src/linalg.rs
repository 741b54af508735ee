//! Newton iteration and the linear algebra behind it.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Band matrix with `kl` sub- and `ku` super-diagonals, stored row-wise with room for pivoting fill.
#[derive(Clone, Debug)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    /// row i holds columns i-kl ..= i+kl+ku
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kl(&self) -> usize {
        self.kl
    }

    pub fn ku(&self) -> usize {
        self.ku
    }

    fn pos(&self, i: usize, j: usize) -> Option<usize> {
        let off = j as isize - i as isize + self.kl as isize;
        if off < 0 || off as usize >= self.width || j >= self.n {
            None
        } else {
            Some(i * self.width + off as usize)
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pos(i, j).map_or(0.0, |p| self.data[p])
    }

    /// Set an entry inside the band. Entries outside are ignored (they must be zero).
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        if j + self.kl < i || j > i + self.ku {
            debug_assert!(v == 0.0, "entry ({i},{j}) outside the band");
            return;
        }
        if let Some(p) = self.pos(i, j) {
            self.data[p] = v;
        }
    }

    /// Row sums of `|a_ij z_j|`.
    pub fn abs_row_scale(&self, z: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| (self.get(i, j) * z[j]).abs()).sum::<f64>()
            })
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Solve `A x = b` by Gaussian elimination with partial pivoting inside the band.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        let mut a = self.clone();
        let mut x = b.to_vec();
        let scale = self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut min_piv = f64::INFINITY;
        let upper = self.kl + self.ku;
        for k in 0..n {
            let last = (k + self.kl).min(n - 1);
            let mut p = k;
            let mut best = a.get(k, k).abs();
            for i in k + 1..=last {
                let v = a.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            min_piv = min_piv.min(best);
            if best <= 1e-300 {
                return Err(Error::SingularJacobian { cond: f64::INFINITY });
            }
            let jmax = (k + upper).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let t = a.get(k, j);
                    let u = a.get(p, j);
                    a.set_raw(k, j, u);
                    a.set_raw(p, j, t);
                }
                x.swap(k, p);
            }
            let piv = a.get(k, k);
            for i in k + 1..=last {
                let f = a.get(i, k) / piv;
                if f == 0.0 {
                    continue;
                }
                a.set_raw(i, k, 0.0);
                for j in k + 1..=jmax {
                    let v = a.get(i, j) - f * a.get(k, j);
                    a.set_raw(i, j, v);
                }
                x[i] -= f * x[k];
            }
        }
        for k in (0..n).rev() {
            let jmax = (k + upper).min(n - 1);
            let mut s = x[k];
            for j in k + 1..=jmax {
                s -= a.get(k, j) * x[j];
            }
            x[k] = s / a.get(k, k);
        }
        if x.iter().any(|v| !v.is_finite()) || min_piv / scale < 1e-15 {
            return Err(Error::SingularJacobian { cond: scale / min_piv });
        }
        Ok(x)
    }

    fn set_raw(&mut self, i: usize, j: usize, v: f64) {
        let p = self.pos(i, j).expect("fill stays inside the widened band");
        self.data[p] = v;
    }
}

/// Jacobian storage.
pub enum Jacobian {
    Dense(DMatrix<f64>),
    Banded(BandMatrix),
}

fn cond_estimate(j: &DMatrix<f64>) -> f64 {
    let sv = j.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Newton step `J dz = -r`: LU when square, least squares via SVD otherwise.
pub fn solve_step(j: &Jacobian, r: &DVector<f64>) -> Result<DVector<f64>> {
    match j {
        Jacobian::Banded(b) => {
            let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
            Ok(DVector::from_vec(b.solve(&rhs)?))
        }
        Jacobian::Dense(m) => {
            let rhs = -r;
            if m.is_square() {
                let lu = m.clone().lu();
                if let Some(dz) = lu.solve(&rhs) {
                    if dz.iter().all(|v| v.is_finite()) {
                        let back = m * &dz - &rhs;
                        let scale = rhs.amax().max(1e-300);
                        if back.amax() <= 1e-6 * scale.max(1.0) {
                            return Ok(dz);
                        }
                    }
                }
                Err(Error::SingularJacobian { cond: cond_estimate(m) })
            } else {
                let svd = m.clone().svd(true, true);
                let max = svd.singular_values.amax();
                let dz = svd
                    .solve(&rhs, max * 1e-13)
                    .map_err(|_| Error::SingularJacobian { cond: f64::INFINITY })?;
                let min = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
                if min <= max * 1e-13 {
                    return Err(Error::SingularJacobian { cond: max / min });
                }
                Ok(dz)
            }
        }
    }
}

/// A square or overdetermined nonlinear system in `dim` unknowns.
pub trait NonlinearSystem {
    fn dim(&self) -> usize;
    fn residual(&self, z: &DVector<f64>) -> Result<DVector<f64>>;
    fn jacobian(&self, z: &DVector<f64>, r: &DVector<f64>) -> Result<Jacobian>;
}

#[derive(Clone, Copy, Debug)]
pub struct NewtonParams {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
}

#[derive(Clone, Debug)]
pub struct NewtonOutcome {
    pub z: DVector<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Damped Newton: the step length starts at `damping` and halves while the residual grows.
///
/// Converges when max |r| <= tol, or (for least-squares systems) when the step stalls below tol.
/// A row also counts as converged at its roundoff floor, `64 eps` times the size of its terms.
pub fn newton(sys: &dyn NonlinearSystem, z0: DVector<f64>, p: &NewtonParams) -> Result<NewtonOutcome> {
    let mut z = z0;
    let mut r = sys.residual(&z)?;
    let mut norm = r.amax();
    for it in 0..p.max_iter {
        if norm <= p.tol {
            return Ok(NewtonOutcome {
                z,
                iterations: it,
                residual: norm,
                converged: true,
            });
        }
        let j = sys.jacobian(&z, &r)?;
        // roundoff floor: residual rows cannot resolve below eps times the size of their terms
        let scale = term_scale(&j, &z);
        let at_floor = r.iter().zip(&scale).all(|(v, s)| v.abs() <= p.tol.max(64.0 * f64::EPSILON * s));
        let square = match &j {
            Jacobian::Dense(m) => m.is_square(),
            Jacobian::Banded(_) => true,
        };
        let dz = solve_step(&j, &r)?;
        if at_floor {
            // keep polishing while full steps still reduce the residual
            let zn = &z + &dz;
            let rn = sys.residual(&zn)?;
            let nn = rn.amax();
            if nn < norm {
                z = zn;
                r = rn;
                norm = nn;
                continue;
            }
            return Ok(NewtonOutcome {
                z,
                iterations: it,
                residual: norm,
                converged: true,
            });
        }
        let mut lambda = p.damping;
        loop {
            let zn = &z + &dz * lambda;
            let rn = sys.residual(&zn)?;
            let nn = rn.amax();
            if nn < norm || lambda < 1e-6 || (!square && nn <= norm * (1.0 + 1e-12)) {
                let step = dz.amax() * lambda;
                z = zn;
                r = rn;
                let stalled = !square && step <= p.tol * (1.0 + z.amax());
                norm = nn;
                if stalled {
                    return Ok(NewtonOutcome {
                        z,
                        iterations: it + 1,
                        residual: norm,
                        converged: true,
                    });
                }
                break;
            }
            lambda *= 0.5;
        }
    }
    Ok(NewtonOutcome {
        converged: norm <= p.tol,
        z,
        iterations: p.max_iter,
        residual: norm,
    })
}

/// Row sums of `|J_ij z_j|`.
fn term_scale(j: &Jacobian, z: &DVector<f64>) -> Vec<f64> {
    match j {
        Jacobian::Dense(m) => m
            .row_iter()
            .map(|row| row.iter().zip(z.iter()).map(|(a, b)| (a * b).abs()).sum::<f64>())
            .collect(),
        Jacobian::Banded(b) => b.abs_row_scale(z.as_slice()),
    }
}

/// Dense central-difference Jacobian with relative step `step * max(|z_c|, 1)`.
pub fn fd_jacobian_dense(
    f: &dyn Fn(&DVector<f64>) -> Result<DVector<f64>>,
    z: &DVector<f64>,
    step: f64,
) -> Result<DMatrix<f64>> {
    let n = z.len();
    let mut cols = Vec::with_capacity(n);
    let mut zp = z.clone();
    for c in 0..n {
        let d = step * z[c].abs().max(1.0);
        zp[c] = z[c] + d;
        let rp = f(&zp)?;
        zp[c] = z[c] - d;
        let rm = f(&zp)?;
        zp[c] = z[c];
        cols.push((rp - rm) / (2.0 * d));
    }
    if cols.is_empty() {
        return Ok(DMatrix::zeros(f(z)?.len(), 0));
    }
    Ok(DMatrix::from_columns(&cols))
}

/// Banded central-difference Jacobian: columns `kl+ku+1` apart are perturbed together.
pub fn fd_jacobian_banded(
    f: &dyn Fn(&DVector<f64>) -> Result<DVector<f64>>,
    z: &DVector<f64>,
    kl: usize,
    ku: usize,
    step: f64,
) -> Result<BandMatrix> {
    let n = z.len();
    let stride = kl + ku + 1;
    let mut jac = BandMatrix::zeros(n, kl, ku);
    let mut zp = z.clone();
    let mut d = vec![0.0; n];
    for color in 0..stride.min(n) {
        for c in (color..n).step_by(stride) {
            d[c] = step * z[c].abs().max(1.0);
            zp[c] = z[c] + d[c];
        }
        let rp = f(&zp)?;
        for c in (color..n).step_by(stride) {
            zp[c] = z[c] - d[c];
        }
        let rm = f(&zp)?;
        for c in (color..n).step_by(stride) {
            zp[c] = z[c];
            let lo = c.saturating_sub(ku);
            let hi = (c + kl).min(n - 1);
            for i in lo..=hi {
                jac.set(i, c, (rp[i] - rm[i]) / (2.0 * d[c]));
            }
        }
    }
    Ok(jac)
}
