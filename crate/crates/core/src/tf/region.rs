use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::grid::{GridField, GridSpec, NucleiSet};
use crate::states::Point;

/// Cells where a potential exceeds a threshold, with the boundary traced
/// by marching squares on the cell-centre values.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreeningRegion {
    pub spec: GridSpec,
    pub threshold: f64,
    pub inside: Vec<bool>,
    pub area: f64,
    /// Closed (or, if the region touches the grid edge, open) polylines.
    pub boundary: Vec<Vec<Point>>,
}

impl ScreeningRegion {
    pub fn from_potential(phi: &GridField, threshold: f64) -> Self {
        let spec = phi.spec;
        let inside: Vec<bool> = phi.values.iter().map(|&v| v > threshold).collect();
        let count = inside.iter().filter(|&&b| b).count();
        let shifted: Vec<f64> = phi.values.iter().map(|v| v - threshold).collect();
        ScreeningRegion {
            spec,
            threshold,
            area: count as f64 * spec.cell_area(),
            boundary: marching_squares(spec, &shifted),
            inside,
        }
    }

    pub fn cell_count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    pub fn contains(&self, p: Point) -> bool {
        self.spec.locate(p).is_some_and(|i| self.inside[i])
    }

    /// Cells of the region whose eight neighbours are also in the region.
    pub fn eroded(&self) -> Vec<bool> {
        let s = self.spec;
        (0..s.len())
            .map(|i| self.inside[i] && neighbours(s, i).all(|j| j.is_some_and(|j| self.inside[j])))
            .collect()
    }

    /// Whether `p` lies in the region, or within one cell of it.
    pub fn contains_dilated(&self, p: Point) -> bool {
        match self.spec.locate(p) {
            Some(i) => self.inside[i] || neighbours(self.spec, i).flatten().any(|j| self.inside[j]),
            None => {
                // Just outside the grid: test the nearest border cell.
                let (lo, hi) = self.spec.bounds();
                let h = self.spec.h;
                let q = [
                    p[0].clamp(lo[0] + 0.5 * h, hi[0] - 0.5 * h),
                    p[1].clamp(lo[1] + 0.5 * h, hi[1] - 0.5 * h),
                ];
                let near = (q[0] - p[0]).abs() <= h && (q[1] - p[1]).abs() <= h;
                near && self.contains_dilated(q)
            }
        }
    }

    /// Number of 4-connected components.
    pub fn components(&self) -> usize {
        let s = self.spec;
        let mut label = vec![false; s.len()];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..s.len() {
            if !self.inside[start] || label[start] {
                continue;
            }
            count += 1;
            label[start] = true;
            stack.push(start);
            while let Some(i) = stack.pop() {
                let (ix, iy) = s.coords(i);
                let mut visit = |jx: usize, jy: usize| {
                    let j = s.index(jx, jy);
                    if self.inside[j] && !label[j] {
                        label[j] = true;
                        stack.push(j);
                    }
                };
                if ix > 0 {
                    visit(ix - 1, iy);
                }
                if ix + 1 < s.nx {
                    visit(ix + 1, iy);
                }
                if iy > 0 {
                    visit(ix, iy - 1);
                }
                if iy + 1 < s.ny {
                    visit(ix, iy + 1);
                }
            }
        }
        count
    }

    /// At least `min_count` points spread along the boundary polylines,
    /// obtained by subdividing segments when the polylines are too short.
    pub fn boundary_points(&self, min_count: usize) -> Vec<Point> {
        let vertices: usize = self.boundary.iter().map(|l| l.len()).sum();
        if vertices == 0 {
            return Vec::new();
        }
        let split = min_count.div_ceil(vertices).max(1);
        let mut out = Vec::new();
        for line in &self.boundary {
            for w in line.windows(2) {
                for k in 0..split {
                    let t = k as f64 / split as f64;
                    out.push([
                        w[0][0] + t * (w[1][0] - w[0][0]),
                        w[0][1] + t * (w[1][1] - w[0][1]),
                    ]);
                }
            }
            if line.len() == 1 {
                out.push(line[0]);
            }
        }
        out
    }

    /// Boundary polylines as CSV with columns `polyline,vertex,x,y`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("polyline,vertex,x,y\n");
        for (k, line) in self.boundary.iter().enumerate() {
            for (j, p) in line.iter().enumerate() {
                let _ = writeln!(s, "{k},{j},{},{}", p[0], p[1]);
            }
        }
        s
    }
}

fn neighbours(s: GridSpec, i: usize) -> impl Iterator<Item = Option<usize>> {
    let (ix, iy) = s.coords(i);
    (-1i64..=1)
        .flat_map(|dy| (-1i64..=1).map(move |dx| (dx, dy)))
        .filter(|&(dx, dy)| dx != 0 || dy != 0)
        .map(move |(dx, dy)| {
            let jx = ix as i64 + dx;
            let jy = iy as i64 + dy;
            if jx < 0 || jy < 0 || jx >= s.nx as i64 || jy >= s.ny as i64 {
                None
            } else {
                Some(s.index(jx as usize, jy as usize))
            }
        })
}

/// Contour `f = 0` of cell-centre values, stitched into polylines. Closed
/// loops repeat their first vertex at the end. Saddles are resolved by the
/// mean of the four corners.
pub fn marching_squares(spec: GridSpec, f: &[f64]) -> Vec<Vec<Point>> {
    let n = spec.len();
    // Edge ids: horizontal edge from (ix, iy) to (ix + 1, iy) is the cell
    // index; vertical edge from (ix, iy) to (ix, iy + 1) is offset by n.
    let crossing = |a: usize, b: usize| -> Point {
        let (fa, fb) = (f[a], f[b]);
        let t = fa / (fa - fb);
        let pa = spec.cell_center(a);
        let pb = spec.cell_center(b);
        [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]
    };
    let mut segments: Vec<(usize, usize)> = Vec::new();
    let mut points: HashMap<usize, Point> = HashMap::new();
    for iy in 0..spec.ny.saturating_sub(1) {
        for ix in 0..spec.nx.saturating_sub(1) {
            let bl = spec.index(ix, iy);
            let br = spec.index(ix + 1, iy);
            let tr = spec.index(ix + 1, iy + 1);
            let tl = spec.index(ix, iy + 1);
            let corners = [bl, br, tr, tl];
            let state = corners.map(|c| f[c] > 0.0);
            // Edge k joins corner k and corner k + 1.
            let edges = [bl, n + br, tl, n + bl];
            let ends = [(bl, br), (br, tr), (tl, tr), (bl, tl)];
            let crossed: Vec<usize> = (0..4).filter(|&k| state[k] != state[(k + 1) % 4]).collect();
            for &k in &crossed {
                let (a, b) = ends[k];
                points.entry(edges[k]).or_insert_with(|| crossing(a, b));
            }
            match crossed.len() {
                2 => segments.push((edges[crossed[0]], edges[crossed[1]])),
                4 => {
                    let center = corners.iter().map(|&c| f[c]).sum::<f64>() > 0.0;
                    // Cut off each corner whose state differs from the centre;
                    // corner k sits between edges k - 1 and k.
                    for k in 0..4 {
                        if state[k] != center {
                            segments.push((edges[(k + 3) % 4], edges[k]));
                        }
                    }
                }
                _ => {}
            }
        }
    }
    stitch(&segments, &points)
}

fn stitch(segments: &[(usize, usize)], points: &HashMap<usize, Point>) -> Vec<Vec<Point>> {
    let mut by_edge: HashMap<usize, Vec<usize>> = HashMap::new();
    for (s, &(a, b)) in segments.iter().enumerate() {
        by_edge.entry(a).or_default().push(s);
        by_edge.entry(b).or_default().push(s);
    }
    let mut used = vec![false; segments.len()];
    let mut lines = Vec::new();
    let walk = |start_seg: usize, start_edge: usize, used: &mut Vec<bool>| {
        let mut line = vec![points[&start_edge]];
        let mut seg = start_seg;
        let mut edge = start_edge;
        loop {
            used[seg] = true;
            let (a, b) = segments[seg];
            edge = if a == edge { b } else { a };
            line.push(points[&edge]);
            match by_edge[&edge].iter().find(|&&t| !used[t]) {
                Some(&t) => seg = t,
                None => break,
            }
        }
        line
    };
    // Open chains first (edges touched by a single segment), then loops.
    for s in 0..segments.len() {
        if used[s] {
            continue;
        }
        let (a, b) = segments[s];
        if by_edge[&a].len() == 1 {
            lines.push(walk(s, a, &mut used));
        } else if by_edge[&b].len() == 1 {
            lines.push(walk(s, b, &mut used));
        }
    }
    for s in 0..segments.len() {
        if !used[s] {
            let a = segments[s].0;
            lines.push(walk(s, a, &mut used));
        }
    }
    lines
}

/// Region geometry compared with the charge of its nuclei.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub charge: f64,
    pub area: f64,
    pub area_error: f64,
    pub cell_count: usize,
    pub components: usize,
    pub containment: Option<ContainmentReport>,
}

/// Cells of a smaller region that are missing from a larger one, beyond a
/// one-cell tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainmentReport {
    pub checked_cells: usize,
    pub violations: usize,
    pub violating_points: Vec<Point>,
}

/// Area against charge, connectivity, and (if a region of a subset of the
/// nuclei is supplied) its containment in `region`.
pub fn region_properties(
    region: &ScreeningRegion,
    nuclei: &NucleiSet,
    subset_region: Option<&ScreeningRegion>,
) -> RegionReport {
    RegionReport {
        charge: nuclei.charge(),
        area: region.area,
        area_error: region.area - nuclei.charge(),
        cell_count: region.cell_count(),
        components: region.components(),
        containment: subset_region.map(|small| containment(small, region)),
    }
}

pub fn containment(smaller: &ScreeningRegion, larger: &ScreeningRegion) -> ContainmentReport {
    let mut violating_points = Vec::new();
    let mut checked_cells = 0;
    for (i, &inside) in smaller.inside.iter().enumerate() {
        if !inside {
            continue;
        }
        checked_cells += 1;
        let p = smaller.spec.cell_center(i);
        if !larger.contains_dilated(p) {
            violating_points.push(p);
        }
    }
    ContainmentReport {
        checked_cells,
        violations: violating_points.len(),
        violating_points,
    }
}

pub const OCCUPIED_LEVEL: f64 = 0.05;
pub const FILLED_LEVEL: f64 = 0.95;

/// How close a density is to a characteristic function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryReport {
    pub occupied_cells: usize,
    pub intermediate_cells: usize,
    pub boundary_cells: usize,
    /// Intermediate cells over occupied cells.
    pub intermediate_fraction: f64,
    /// Boundary cells over occupied cells.
    pub bound: f64,
    pub passed: bool,
}

/// Counts cells with `0.05 < sigma < 0.95` and compares their share of the
/// occupied cells (`sigma > 0.05`) with the share of occupied cells on the
/// boundary of the occupied set.
pub fn tf_binary_check(sigma: &GridField) -> BinaryReport {
    let s = sigma.spec;
    let occupied: Vec<bool> = sigma.values.iter().map(|&v| v > OCCUPIED_LEVEL).collect();
    let occupied_cells = occupied.iter().filter(|&&b| b).count();
    let intermediate_cells = sigma
        .values
        .iter()
        .filter(|&&v| v > OCCUPIED_LEVEL && v < FILLED_LEVEL)
        .count();
    let boundary_cells = (0..s.len())
        .filter(|&i| {
            let (ix, iy) = s.coords(i);
            occupied[i]
                && [(0i64, 1i64), (0, -1), (1, 0), (-1, 0)].iter().any(|&(dx, dy)| {
                    let jx = ix as i64 + dx;
                    let jy = iy as i64 + dy;
                    jx < 0
                        || jy < 0
                        || jx >= s.nx as i64
                        || jy >= s.ny as i64
                        || !occupied[s.index(jx as usize, jy as usize)]
                })
        })
        .count();
    let denom = occupied_cells.max(1) as f64;
    let intermediate_fraction = intermediate_cells as f64 / denom;
    let bound = boundary_cells as f64 / denom;
    BinaryReport {
        occupied_cells,
        intermediate_cells,
        boundary_cells,
        intermediate_fraction,
        bound,
        passed: occupied_cells > 0 && intermediate_fraction <= bound,
    }
}

/// `h^2 sum [sigma max(-phi, 0) + (1 - sigma) max(phi, 0) 1{outside region}]`.
pub fn complementarity_residual(sigma: &GridField, phi: &GridField, region: &ScreeningRegion) -> f64 {
    let h2 = sigma.spec.cell_area();
    let sum: f64 = sigma
        .values
        .iter()
        .zip(&phi.values)
        .zip(&region.inside)
        .map(|((&s, &p), &inside)| {
            let outer = if inside { 0.0 } else { (1.0 - s) * p.max(0.0) };
            s * (-p).max(0.0) + outer
        })
        .sum();
    h2 * sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tf::grid::FieldRole;

    fn cone(n: usize, r: f64) -> GridField {
        let h = 4.0 / n as f64;
        let spec = GridSpec::new([-2.0 + h / 2.0, -2.0 + h / 2.0], h, n, n).unwrap();
        let values = (0..spec.len())
            .map(|i| {
                let c = spec.cell_center(i);
                r - c[0].hypot(c[1])
            })
            .collect();
        GridField::new(spec, FieldRole::Phi, values).unwrap()
    }

    #[test]
    fn marching_squares_traces_a_circle() {
        let f = cone(64, 1.0);
        let region = ScreeningRegion::from_potential(&f, 0.0);
        assert_eq!(region.boundary.len(), 1);
        let line = &region.boundary[0];
        assert_eq!(line.first(), line.last());
        for p in line {
            assert!((p[0].hypot(p[1]) - 1.0).abs() < 0.01);
        }
        assert!((region.area - std::f64::consts::PI).abs() < 0.1);
        assert_eq!(region.components(), 1);
        assert!(region.boundary_points(500).len() >= 500);
        assert!(region.to_csv().lines().count() == line.len() + 1);
    }

    #[test]
    fn two_blobs_give_two_loops() {
        let n = 64;
        let h = 4.0 / n as f64;
        let spec = GridSpec::new([-2.0 + h / 2.0, -2.0 + h / 2.0], h, n, n).unwrap();
        let values = (0..spec.len())
            .map(|i| {
                let c = spec.cell_center(i);
                let a = (c[0] - 1.0).hypot(c[1]);
                let b = (c[0] + 1.0).hypot(c[1]);
                0.5 - a.min(b)
            })
            .collect();
        let f = GridField::new(spec, FieldRole::Phi, values).unwrap();
        let region = ScreeningRegion::from_potential(&f, 0.0);
        assert_eq!(region.boundary.len(), 2);
        assert_eq!(region.components(), 2);
    }

    #[test]
    fn containment_of_nested_disks() {
        let small = ScreeningRegion::from_potential(&cone(64, 0.5), 0.0);
        let big = ScreeningRegion::from_potential(&cone(64, 1.0), 0.0);
        assert_eq!(containment(&small, &big).violations, 0);
        let rep = containment(&big, &small);
        assert!(rep.violations > 0);
        assert_eq!(rep.checked_cells, big.cell_count());
    }

    #[test]
    fn dilation_accepts_one_cell_overhang() {
        let big = ScreeningRegion::from_potential(&cone(64, 1.0), 0.0);
        let h = big.spec.h;
        assert!(big.contains_dilated([1.0 + 0.6 * h, 0.0]));
        assert!(!big.contains_dilated([1.0 + 2.5 * h, 0.0]));
        let eroded = big.eroded();
        assert!(eroded.iter().filter(|&&b| b).count() < big.cell_count());
    }

    #[test]
    fn binary_check_examples() {
        let spec = GridSpec::new([0.0, 0.0], 0.1, 20, 20).unwrap();
        let binary: Vec<f64> = (0..spec.len())
            .map(|i| {
                let (x, y) = spec.coords(i);
                if (5..15).contains(&x) && (5..15).contains(&y) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let r = tf_binary_check(&GridField::new(spec, FieldRole::Sigma, binary).unwrap());
        assert_eq!(r.intermediate_fraction, 0.0);
        assert_eq!(r.boundary_cells, 36);
        assert!(r.passed);
        let half = GridField::new(spec, FieldRole::Sigma, vec![0.5; spec.len()]).unwrap();
        let r = tf_binary_check(&half);
        assert_eq!(r.intermediate_fraction, 1.0);
        assert!(!r.passed);
    }

    #[test]
    fn complementarity_of_exact_pair_is_zero() {
        let spec = GridSpec::new([0.0, 0.0], 0.1, 4, 4).unwrap();
        let sigma = GridField::new(spec, FieldRole::Sigma, vec![1.0, 0.0, 0.0, 0.0].repeat(4)).unwrap();
        let phi = GridField::new(spec, FieldRole::Phi, vec![0.3, 0.0, -0.1, 0.0].repeat(4)).unwrap();
        let region = ScreeningRegion::from_potential(&phi, 0.01);
        assert_eq!(complementarity_residual(&sigma, &phi, &region), 0.0);
        let bad = GridField::new(spec, FieldRole::Phi, vec![-0.3, 0.0, 0.0, 0.0].repeat(4)).unwrap();
        let r = complementarity_residual(&sigma, &bad, &region);
        assert!((r - 4.0 * 0.3 * 0.01).abs() < 1e-15);
    }
}
