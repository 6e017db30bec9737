//! Quadrature representations of the shell: nodes, weights and outward normals.

use crate::error::{Error, Result};
use crate::special::gauss_legendre;
use crate::Vec3;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::Path;

#[derive(Clone, Debug, PartialEq)]
pub enum SurfaceKind {
    /// Gauss-Legendre in `cos(theta)` times `2 n_theta` uniform azimuths.
    Sphere { radius: f64, n_theta: usize },
    /// One node per triangle centroid.
    Mesh { path: String, faces: usize },
}

#[derive(Clone, Debug)]
pub struct Surface {
    pub nodes: Vec<Vec3>,
    pub weights: Vec<f64>,
    pub normals: Vec<Vec3>,
    pub kind: SurfaceKind,
}

impl Surface {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn area(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Mean node spacing `sqrt(area / N)`.
    pub fn h_min(&self) -> f64 {
        (self.area() / self.len() as f64).sqrt()
    }

    /// Distance from `x` to the nearest node.
    pub fn distance_to(&self, x: &Vec3) -> f64 {
        self.nodes.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min)
    }

    pub fn integrate<F: Fn(&Vec3) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(x)).sum()
    }

    pub fn sphere_params(&self) -> Option<(f64, usize)> {
        match self.kind {
            SurfaceKind::Sphere { radius, n_theta } => Some((radius, n_theta)),
            _ => None,
        }
    }
}

/// Product rule on the sphere of radius `radius`: `n_theta` Gauss-Legendre nodes in
/// `cos(theta)` and `2 n_theta` uniform azimuths; node index `t * 2 n_theta + p`.
pub fn make_sphere(radius: f64, n_theta: usize) -> Result<Surface> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Invalid(format!("sphere radius must be positive, got {radius}")));
    }
    if n_theta < 4 {
        return Err(Error::Invalid(format!("n_theta must be at least 4, got {n_theta}")));
    }
    let (ct, wt) = gauss_legendre(n_theta);
    let np = 2 * n_theta;
    let dphi = 2.0 * PI / np as f64;
    let mut nodes = Vec::with_capacity(n_theta * np);
    let mut weights = Vec::with_capacity(n_theta * np);
    let mut normals = Vec::with_capacity(n_theta * np);
    for (t, &z) in ct.iter().enumerate() {
        let s = (1.0 - z * z).sqrt();
        for p in 0..np {
            let phi = p as f64 * dphi;
            let nu = Vec3::new(s * phi.cos(), s * phi.sin(), z);
            nodes.push(nu * radius);
            normals.push(nu);
            weights.push(radius * radius * wt[t] * dphi);
        }
    }
    Ok(Surface { nodes, weights, normals, kind: SurfaceKind::Sphere { radius, n_theta } })
}

/// Reads a closed triangle mesh in the OFF format (`OFF`, `nv nf 0`, vertices,
/// faces `3 i j k`, 0-based, counterclockwise seen from outside).
pub fn load_mesh(path: impl AsRef<Path>) -> Result<Surface> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let (verts, faces) = parse_off(&text)?;
    mesh_surface(&verts, &faces, path.display().to_string())
}

fn parse_off(text: &str) -> Result<(Vec<Vec3>, Vec<[usize; 3]>)> {
    let mut lines = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty());
    match lines.next() {
        Some("OFF") => {}
        other => return Err(Error::Parse(format!("expected header OFF, found {other:?}"))),
    }
    let counts: Vec<usize> = lines
        .next()
        .ok_or_else(|| Error::Parse("missing count line".into()))?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad count {t:?}"))))
        .collect::<Result<_>>()?;
    if counts.len() < 2 {
        return Err(Error::Parse("count line needs nv and nf".into()));
    }
    let (nv, nf) = (counts[0], counts[1]);
    let mut verts = Vec::with_capacity(nv);
    for i in 0..nv {
        let line = lines.next().ok_or_else(|| Error::Parse(format!("missing vertex {i}")))?;
        let v: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad coordinate {t:?}"))))
            .collect::<Result<_>>()?;
        if v.len() != 3 || v.iter().any(|c| !c.is_finite()) {
            return Err(Error::Parse(format!("vertex {i} needs three finite coordinates")));
        }
        verts.push(Vec3::new(v[0], v[1], v[2]));
    }
    let mut faces = Vec::with_capacity(nf);
    for f in 0..nf {
        let line = lines.next().ok_or_else(|| Error::Parse(format!("missing face {f}")))?;
        let v: Vec<usize> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad index {t:?}"))))
            .collect::<Result<_>>()?;
        if v.len() != 4 || v[0] != 3 {
            return Err(Error::Parse(format!("face {f} is not a triangle")));
        }
        if v[1..].iter().any(|&i| i >= nv) {
            return Err(Error::Parse(format!("face {f} references a missing vertex")));
        }
        faces.push([v[1], v[2], v[3]]);
    }
    Ok((verts, faces))
}

pub(crate) fn mesh_surface(verts: &[Vec3], faces: &[[usize; 3]], path: String) -> Result<Surface> {
    if faces.is_empty() {
        return Err(Error::Parse("mesh has no faces".into()));
    }
    // every directed edge once, its reverse exactly once
    let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
    for (f, t) in faces.iter().enumerate() {
        for e in 0..3 {
            let key = (t[e], t[(e + 1) % 3]);
            if directed.insert(key, f).is_some() {
                return Err(Error::Parse(format!("inconsistent winding at edge {key:?}")));
            }
        }
    }
    for &(a, b) in directed.keys() {
        if !directed.contains_key(&(b, a)) {
            return Err(Error::NonClosedMesh(a.min(b), a.max(b)));
        }
    }
    let (mut lo, mut hi) = (verts[0], verts[0]);
    for v in verts {
        lo = lo.inf(v);
        hi = hi.sup(v);
    }
    let bbox2 = (hi - lo).norm_squared();
    let mut nodes = Vec::with_capacity(faces.len());
    let mut weights = Vec::with_capacity(faces.len());
    let mut normals = Vec::with_capacity(faces.len());
    let mut volume = 0.0;
    for (f, t) in faces.iter().enumerate() {
        let (a, b, c) = (verts[t[0]], verts[t[1]], verts[t[2]]);
        let cr = (b - a).cross(&(c - a));
        let area = 0.5 * cr.norm();
        if area < 1e-14 * bbox2 {
            return Err(Error::DegenerateTriangle(f));
        }
        volume += a.dot(&b.cross(&c)) / 6.0;
        nodes.push((a + b + c) / 3.0);
        weights.push(area);
        normals.push(cr / cr.norm());
    }
    if volume < 0.0 {
        for n in &mut normals {
            *n = -*n;
        }
    }
    Ok(Surface { nodes, weights, normals, kind: SurfaceKind::Mesh { path, faces: faces.len() } })
}

/// Discrete measure `sigma(B(x, rho) n Sigma)` for each radius.
pub fn ball_measure_profile(s: &Surface, x: &Vec3, radii: &[f64]) -> Vec<f64> {
    let mut d: Vec<(f64, f64)> = s.nodes.iter().zip(&s.weights).map(|(y, w)| ((x - y).norm(), *w)).collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = Vec::with_capacity(radii.len());
    let mut acc = 0.0;
    let mut j = 0;
    for &rho in radii {
        while j < d.len() && d[j].0 <= rho {
            acc += d[j].1;
            j += 1;
        }
        out.push(acc);
    }
    out
}

/// Icosphere with `20 * 4^level` faces projected onto the sphere of radius `radius`.
pub fn icosphere(radius: f64, level: usize) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut v: Vec<Vec3> = [
        (-1.0, t, 0.0), (1.0, t, 0.0), (-1.0, -t, 0.0), (1.0, -t, 0.0),
        (0.0, -1.0, t), (0.0, 1.0, t), (0.0, -1.0, -t), (0.0, 1.0, -t),
        (t, 0.0, -1.0), (t, 0.0, 1.0), (-t, 0.0, -1.0), (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(a, b, c)| Vec3::new(a, b, c).normalize())
    .collect();
    let mut f: Vec<[usize; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..level {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut nf = Vec::with_capacity(f.len() * 4);
        for tri in &f {
            let mut m = [0usize; 3];
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                let key = (a.min(b), a.max(b));
                m[e] = *mid.entry(key).or_insert_with(|| {
                    v.push(((v[a] + v[b]) * 0.5).normalize());
                    v.len() - 1
                });
            }
            nf.push([tri[0], m[0], m[2]]);
            nf.push([tri[1], m[1], m[0]]);
            nf.push([tri[2], m[2], m[1]]);
            nf.push([m[0], m[1], m[2]]);
        }
        f = nf;
    }
    (v.into_iter().map(|p| p * radius).collect(), f)
}

/// Writes a mesh in the OFF format read by [`load_mesh`].
pub fn write_off(path: impl AsRef<Path>, verts: &[Vec3], faces: &[[usize; 3]]) -> Result<()> {
    use std::fmt::Write as _;
    let mut s = String::new();
    let _ = writeln!(s, "OFF\n{} {} 0", verts.len(), faces.len());
    for v in verts {
        let _ = writeln!(s, "{:.17e} {:.17e} {:.17e}", v[0], v[1], v[2]);
    }
    for t in faces {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    std::fs::write(path, s)?;
    Ok(())
}
