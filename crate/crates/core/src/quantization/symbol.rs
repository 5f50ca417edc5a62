//! Classical symbols: commutative evaluation of generator expressions on a
//! phase-space grid, and refined sup norms.

use std::f64::consts::PI;

use crate::algebra::C64;
use crate::error::{Error, Result};
use crate::expr::{Generator, GeneratorExpression};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhaseSpace {
    /// Unit sphere, points `(theta, phi)`.
    Sphere,
    /// Unit torus `[0,1)^2`, points `(t1, t2)`.
    Torus,
}

#[derive(Clone, Debug)]
pub struct SymbolGrid {
    space: PhaseSpace,
    points: Vec<[f64; 2]>,
    spacing: [f64; 2],
}

impl SymbolGrid {
    /// Latitude-longitude grid with both poles.
    pub fn sphere(n_theta: usize, n_phi: usize) -> Self {
        let n_theta = n_theta.max(3);
        let n_phi = n_phi.max(4);
        let mut points = vec![[0.0, 0.0]];
        for k in 1..n_theta - 1 {
            let theta = PI * k as f64 / (n_theta - 1) as f64;
            for l in 0..n_phi {
                points.push([theta, 2.0 * PI * l as f64 / n_phi as f64]);
            }
        }
        points.push([PI, 0.0]);
        Self {
            space: PhaseSpace::Sphere,
            points,
            spacing: [PI / (n_theta - 1) as f64, 2.0 * PI / n_phi as f64],
        }
    }

    /// Uniform `n x n` torus grid.
    pub fn torus(n: usize) -> Self {
        let n = n.max(2);
        let mut points = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                points.push([a as f64 / n as f64, b as f64 / n as f64]);
            }
        }
        Self {
            space: PhaseSpace::Torus,
            points,
            spacing: [1.0 / n as f64, 1.0 / n as f64],
        }
    }

    pub fn space(&self) -> PhaseSpace {
        self.space
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Value of a generator at a phase-space point.
    pub fn letter_value(&self, g: Generator, p: [f64; 2]) -> Result<C64> {
        match (self.space, g) {
            (PhaseSpace::Sphere, Generator::Coord(a)) if a < 3 => {
                let (st, ct) = p[0].sin_cos();
                let (sp, cp) = p[1].sin_cos();
                let v = [st * cp, st * sp, ct][a as usize];
                Ok(C64::new(v, 0.0))
            }
            (PhaseSpace::Torus, Generator::Mode(m1, m2)) => Ok(C64::from_polar(
                1.0,
                2.0 * PI * (m1 as f64 * p[0] + m2 as f64 * p[1]),
            )),
            _ => Err(Error::UnknownLabel(g.label())),
        }
    }

    /// Commutative evaluation; coefficient functions contribute their limit
    /// values.
    pub fn eval_at(&self, expr: &GeneratorExpression, p: [f64; 2]) -> Result<C64> {
        let mut acc = C64::new(0.0, 0.0);
        for t in expr.terms() {
            let mut v = t.coeff_at_limit()?;
            for &g in &t.word {
                v *= self.letter_value(g, p)?;
            }
            acc += v;
        }
        Ok(acc)
    }

    pub fn eval(&self, expr: &GeneratorExpression) -> Result<Vec<C64>> {
        self.points.iter().map(|&p| self.eval_at(expr, p)).collect()
    }

    /// `sup |f|` over the grid, refined by a local pattern search from the
    /// best grid points.
    pub fn sup_norm(&self, expr: &GeneratorExpression) -> Result<f64> {
        if self.space == PhaseSpace::Torus {
            // a single trigonometric monomial is unimodular up to its coefficient
            let e = expr.canonical();
            if let [t] = e.terms() {
                for &g in &t.word {
                    self.letter_value(g, [0.0, 0.0])?;
                }
                return Ok(t.coeff_at_limit()?.norm());
            }
        }
        let values = self.eval(expr)?;
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[b].norm().total_cmp(&values[a].norm()));
        let mut best = values.get(order.first().copied().unwrap_or(0)).map_or(0.0, |z| z.norm());
        for &k in order.iter().take(4) {
            let mut p = self.points[k];
            let mut val = values[k].norm();
            let mut step = self.spacing;
            for _ in 0..40 {
                let mut moved = false;
                for d in [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]] {
                    let q = [p[0] + d[0] * step[0], p[1] + d[1] * step[1]];
                    let v = self.eval_at(expr, q)?.norm();
                    if v > val {
                        val = v;
                        p = q;
                        moved = true;
                    }
                }
                if !moved {
                    step = [step[0] * 0.5, step[1] * 0.5];
                    if step[0] < 1e-9 {
                        break;
                    }
                }
            }
            best = best.max(val);
        }
        Ok(best)
    }
}
