//! Cat-state squeezing surfaces and their level sets.

use std::collections::HashMap;

use crate::analytic::{cat_variance, Parity};
use crate::fock::Quadrature;

use super::figures::Table;

/// Values on a rectangular grid, `values[j][i]` at `(xs[i], ys[j])`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl Grid {
    pub fn tabulate(xs: Vec<f64>, ys: Vec<f64>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = ys.iter().map(|&y| xs.iter().map(|&x| f(x, y)).collect()).collect();
        Grid { xs, ys, values }
    }
}

// Edge identifiers: horizontal edges first, then vertical ones.
fn horizontal(nx: usize, i: usize, j: usize) -> usize {
    j * (nx - 1) + i
}

fn vertical(nx: usize, ny: usize, i: usize, j: usize) -> usize {
    (nx - 1) * ny + j * nx + i
}

/// Level set of `grid` at `level` as polylines, by marching squares with
/// linear interpolation along cell edges. Saddle cells are split by the
/// value at the cell centre.
pub fn marching_squares(grid: &Grid, level: f64) -> Vec<Vec<(f64, f64)>> {
    let (nx, ny) = (grid.xs.len(), grid.ys.len());
    if nx < 2 || ny < 2 {
        return Vec::new();
    }
    let z = |i: usize, j: usize| grid.values[j][i];
    let crossing = |a: f64, b: f64| {
        let d = b - a;
        if d == 0.0 { 0.5 } else { ((level - a) / d).clamp(0.0, 1.0) }
    };
    let mut points: HashMap<usize, (f64, f64)> = HashMap::new();
    let mut segments: Vec<(usize, usize)> = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let c = [z(i, j), z(i + 1, j), z(i + 1, j + 1), z(i, j + 1)];
            let case = c.iter().enumerate().fold(0, |acc, (k, &v)| acc | (usize::from(v > level) << k));
            let (x0, x1, y0, y1) = (grid.xs[i], grid.xs[i + 1], grid.ys[j], grid.ys[j + 1]);
            let edge = |e: usize, points: &mut HashMap<usize, (f64, f64)>| {
                let (id, p) = match e {
                    0 => (horizontal(nx, i, j), (x0 + crossing(c[0], c[1]) * (x1 - x0), y0)),
                    1 => (vertical(nx, ny, i + 1, j), (x1, y0 + crossing(c[1], c[2]) * (y1 - y0))),
                    2 => (horizontal(nx, i, j + 1), (x0 + crossing(c[3], c[2]) * (x1 - x0), y1)),
                    _ => (vertical(nx, ny, i, j), (x0, y0 + crossing(c[0], c[3]) * (y1 - y0))),
                };
                points.entry(id).or_insert(p);
                id
            };
            let centre_above = c.iter().sum::<f64>() / 4.0 > level;
            let pairs: &[(usize, usize)] = match case {
                1 | 14 => &[(3, 0)],
                2 | 13 => &[(0, 1)],
                3 | 12 => &[(3, 1)],
                4 | 11 => &[(1, 2)],
                6 | 9 => &[(0, 2)],
                7 | 8 => &[(3, 2)],
                5 if centre_above => &[(0, 1), (2, 3)],
                5 => &[(3, 0), (1, 2)],
                10 if centre_above => &[(3, 0), (1, 2)],
                10 => &[(0, 1), (2, 3)],
                _ => &[],
            };
            for &(a, b) in pairs {
                let ea = edge(a, &mut points);
                let eb = edge(b, &mut points);
                segments.push((ea, eb));
            }
        }
    }
    chain(&segments, &points)
}

fn chain(segments: &[(usize, usize)], points: &HashMap<usize, (f64, f64)>) -> Vec<Vec<(f64, f64)>> {
    let mut neighbours: HashMap<usize, Vec<usize>> = HashMap::new();
    for (k, &(a, b)) in segments.iter().enumerate() {
        neighbours.entry(a).or_default().push(k);
        neighbours.entry(b).or_default().push(k);
    }
    let mut used = vec![false; segments.len()];
    let mut lines = Vec::new();
    let walk = |start_edge: usize, first: usize, used: &mut Vec<bool>| {
        let mut line = vec![points[&start_edge]];
        let mut at = start_edge;
        let mut seg = Some(first);
        while let Some(k) = seg {
            used[k] = true;
            let (a, b) = segments[k];
            at = if a == at { b } else { a };
            line.push(points[&at]);
            seg = neighbours[&at].iter().copied().find(|&s| !used[s]);
        }
        line
    };
    // open lines start at edges touched once, at the grid boundary
    let mut ends: Vec<usize> =
        neighbours.iter().filter(|(_, s)| s.len() == 1).map(|(&e, _)| e).collect();
    ends.sort_unstable();
    for e in ends {
        let first = neighbours[&e][0];
        if !used[first] {
            lines.push(walk(e, first, &mut used));
        }
    }
    for k in 0..segments.len() {
        if !used[k] {
            lines.push(walk(segments[k].0, k, &mut used));
        }
    }
    lines
}

/// Surfaces and level sets of the cat-state variances.
#[derive(Clone, Debug, PartialEq)]
pub struct ContourData {
    /// `(phi, v, var_phi, var_v)` for every grid point.
    pub surface: Table,
    /// `(level, line, phi, v)` per quadrature, Φ first.
    pub lines: [Table; 2],
}

pub fn contour_data(extent: f64, points: usize, parity: Parity, levels: &[f64]) -> ContourData {
    let axis: Vec<f64> = (0..points)
        .map(|k| -extent + 2.0 * extent * k as f64 / (points - 1) as f64)
        .collect();
    let grids = Quadrature::BOTH.map(|q| {
        Grid::tabulate(axis.clone(), axis.clone(), |phi, v| cat_variance(phi, v, parity, q))
    });
    let mut surface = Vec::with_capacity(points * points);
    for (j, &v) in axis.iter().enumerate() {
        for (i, &phi) in axis.iter().enumerate() {
            surface.push(vec![phi, v, grids[0].values[j][i], grids[1].values[j][i]]);
        }
    }
    let lines = grids.map(|grid| {
        let mut rows = Vec::new();
        for &level in levels {
            for (id, line) in marching_squares(&grid, level).iter().enumerate() {
                rows.extend(line.iter().map(|&(x, y)| vec![level, id as f64, x, y]));
            }
        }
        Table { header: vec!["level", "line", "phi", "v"], rows }
    });
    ContourData {
        surface: Table { header: vec!["phi", "v", "var_phi", "var_v"], rows: surface },
        lines,
    }
}
