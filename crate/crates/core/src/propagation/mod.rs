//! Deterministic surrogate ray tracer.
//!
//! Produces the departure multipath `(gain, azimuth, elevation)` of each user
//! under a [`FidelityProfile`]: line of sight, image-method specular
//! reflections off vertical walls, and single knife-edge diffraction around
//! vertical building corners, optionally followed by one reflection.

pub mod fresnel;

use alloc::vec::Vec;

use crate::geometry::{
    cross2, polyline_clear, prism_edges, prism_faces, segment_blocked, segment_hits_box, Edge,
    Face, EPS,
};
use crate::math::{cis, Complex64, Vec3, PI};
use crate::scene::{FidelityProfile, Prism, Scene};

pub use fresnel::{knife_edge_amplitude, fresnel_parameter};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PathKind {
    LoS,
    Reflection(u8),
    Diffraction,
    DiffractionReflection,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Interaction {
    Reflection { normal: Vec3 },
    Diffraction { nu: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vertex {
    pub point: Vec3,
    pub interaction: Interaction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    /// Complex baseband amplitude.
    pub gain: Complex64,
    /// Departure azimuth in the array frame, in `(-π, π]`.
    pub azimuth_rad: f64,
    pub elevation_rad: f64,
    pub kind: PathKind,
    /// Unfolded propagation length.
    pub length_m: f64,
    /// Interaction points between the BS and the user.
    pub vertices: Vec<Vertex>,
}

impl Path {
    /// Full polyline: BS, interaction points, user.
    pub fn polyline(&self, bs: Vec3, user: Vec3) -> Vec<Vec3> {
        let mut pts = Vec::with_capacity(self.vertices.len() + 2);
        pts.push(bs);
        pts.extend(self.vertices.iter().map(|v| v.point));
        pts.push(user);
        pts
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PathList {
    pub user_index: usize,
    pub paths: Vec<Path>,
}

impl PathList {
    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn has_los(&self) -> bool {
        self.paths.iter().any(|p| p.kind == PathKind::LoS)
    }
}

/// Orthonormal frame whose first axis is the array axis.
#[derive(Debug, Clone, Copy)]
struct ArrayFrame {
    e1: Vec3,
    e2: Vec3,
    e3: Vec3,
}

impl ArrayFrame {
    fn new(axis: Vec3) -> Self {
        let e1 = axis.normalized();
        let up = Vec3::new(0.0, 0.0, 1.0);
        let reference = if (up - e1 * up.dot(e1)).norm() < 1e-9 {
            Vec3::new(1.0, 0.0, 0.0)
        } else {
            up
        };
        let e3 = (reference - e1 * reference.dot(e1)).normalized();
        let e2 = e3.cross(e1);
        Self { e1, e2, e3 }
    }

    /// `(azimuth, elevation)` of direction `d`, with
    /// `cos(el)·cos(az) = d̂·axis`.
    fn angles(&self, d: Vec3) -> (f64, f64) {
        let d = d.normalized();
        let mut az = libm::atan2(d.dot(self.e2), d.dot(self.e1));
        if az <= -PI {
            az = PI;
        }
        let el = libm::asin(d.dot(self.e3).clamp(-1.0, 1.0));
        (az, el)
    }
}

/// Geometry of one twin, prepared for repeated per-user tracing.
#[derive(Debug, Clone)]
pub struct Tracer {
    bs: Vec3,
    wavelength: f64,
    max_paths: usize,
    profile: FidelityProfile,
    frame: ArrayFrame,
    prisms: Vec<Prism>,
    faces: Vec<Face>,
    edges: Vec<Edge>,
    /// Face sequences with the matching BS images, for every order up to the
    /// profile's reflection budget.
    image_chains: Vec<ImageChain>,
}

#[derive(Debug, Clone)]
struct ImageChain {
    faces: Vec<usize>,
    /// `images[i]` is the BS mirrored through `faces[0..=i]`.
    images: Vec<Vec3>,
}

impl Tracer {
    pub fn new(scene: &Scene, profile: &FidelityProfile) -> Self {
        let prisms = scene.buildings_for(profile);
        let faces: Vec<Face> = prisms
            .iter()
            .enumerate()
            .flat_map(|(i, p)| prism_faces(i, p))
            .collect();
        let edges: Vec<Edge> = prisms
            .iter()
            .enumerate()
            .flat_map(|(i, p)| prism_edges(i, p))
            .collect();
        let mut tracer = Self {
            bs: scene.bs_position,
            wavelength: scene.wavelength(),
            max_paths: scene.max_paths,
            profile: *profile,
            frame: ArrayFrame::new(scene.array_axis_for(profile)),
            prisms,
            faces,
            edges,
            image_chains: Vec::new(),
        };
        tracer.image_chains = tracer.build_image_chains(profile.max_reflections);
        tracer
    }

    pub fn profile(&self) -> &FidelityProfile {
        &self.profile
    }

    pub fn prisms(&self) -> &[Prism] {
        &self.prisms
    }

    fn build_image_chains(&self, max_order: u8) -> Vec<ImageChain> {
        let mut out = Vec::new();
        let mut frontier: Vec<ImageChain> = Vec::new();
        for (fi, f) in self.faces.iter().enumerate() {
            if max_order == 0 || !f.in_front(self.bs) {
                continue;
            }
            frontier.push(ImageChain {
                faces: alloc::vec![fi],
                images: alloc::vec![f.mirror(self.bs)],
            });
        }
        for _ in 1..max_order {
            let mut next = Vec::new();
            for chain in &frontier {
                let last = *chain.faces.last().unwrap();
                let src = *chain.images.last().unwrap();
                for (fi, f) in self.faces.iter().enumerate() {
                    if fi == last {
                        continue;
                    }
                    // The previous reflection point lies on `faces[last]`; a
                    // wall that is entirely behind it cannot be hit next.
                    let prev = &self.faces[last];
                    if !face_maybe_visible_from(prev, f) {
                        continue;
                    }
                    let mut c = chain.clone();
                    c.faces.push(fi);
                    c.images.push(f.mirror(src));
                    next.push(c);
                }
            }
            out.append(&mut frontier);
            frontier = next;
        }
        out.append(&mut frontier);
        out
    }

    fn make_path(&self, kind: PathKind, factor: Complex64, vertices: Vec<Vertex>, user: Vec3) -> Path {
        let mut length = 0.0;
        let mut prev = self.bs;
        for v in &vertices {
            length += prev.distance(v.point);
            prev = v.point;
        }
        length += prev.distance(user);
        let first = vertices.first().map(|v| v.point).unwrap_or(user);
        let (az, el) = self.frame.angles(first - self.bs);
        let k = 2.0 * PI / self.wavelength;
        let gain = factor * (self.wavelength / (4.0 * PI * length)) * cis(-k * length);
        Path {
            gain,
            azimuth_rad: az,
            elevation_rad: el,
            kind,
            length_m: length,
            vertices,
        }
    }

    pub fn trace_los(&self, user: Vec3) -> Option<Path> {
        if segment_blocked(self.bs, user, &self.prisms) {
            return None;
        }
        let mut p = self.make_path(PathKind::LoS, Complex64::new(1.0, 0.0), Vec::new(), user);
        p.length_m = self.bs.distance(user);
        Some(p)
    }

    /// Image-method reflections up to `max_order` bounces (capped by the
    /// chains prepared for this profile).
    pub fn trace_reflections(&self, user: Vec3, max_order: u8) -> Vec<Path> {
        let mut out = Vec::new();
        for chain in &self.image_chains {
            let order = chain.faces.len();
            if order > max_order as usize {
                continue;
            }
            if let Some(vertices) = self.unfold_chain(chain, user) {
                let factor = pow_c(self.profile.reflection_coeff, order);
                out.push(self.make_path(PathKind::Reflection(order as u8), factor, vertices, user));
            }
        }
        out
    }

    fn unfold_chain(&self, chain: &ImageChain, user: Vec3) -> Option<Vec<Vertex>> {
        let order = chain.faces.len();
        let mut points = alloc::vec![Vec3::ZERO; order];
        let mut target = user;
        for i in (0..order).rev() {
            let face = &self.faces[chain.faces[i]];
            let r = face.plane_crossing(target, chain.images[i])?;
            if !face.contains_strict(r) {
                return None;
            }
            points[i] = r;
            target = r;
        }
        // Both neighbours of every bounce must be on the wall's outer side.
        for i in 0..order {
            let face = &self.faces[chain.faces[i]];
            let prev = if i == 0 { self.bs } else { points[i - 1] };
            let next = if i + 1 == order { user } else { points[i + 1] };
            if !face.in_front(prev) || !face.in_front(next) {
                return None;
            }
        }
        let mut poly = Vec::with_capacity(order + 2);
        poly.push(self.bs);
        poly.extend_from_slice(&points);
        poly.push(user);
        if !polyline_clear(&poly, &self.prisms) {
            return None;
        }
        Some(
            points
                .iter()
                .zip(&chain.faces)
                .map(|(p, &fi)| Vertex {
                    point: *p,
                    interaction: Interaction::Reflection {
                        normal: self.faces[fi].normal(),
                    },
                })
                .collect(),
        )
    }

    /// Single knife-edge diffraction around vertical corners into the shadow
    /// of the corner's building. Non-exclusive profiles also get one
    /// reflection after the diffraction.
    pub fn trace_diffraction(&self, user: Vec3) -> Vec<Path> {
        let mut out = Vec::new();
        if !self.profile.diffraction_enabled {
            return out;
        }
        for edge in &self.edges {
            if let Some((point, nu)) = self.diffraction_point(edge, user, true) {
                if !segment_blocked(self.bs, point, &self.prisms)
                    && !segment_blocked(point, user, &self.prisms)
                {
                    let amp = knife_edge_amplitude(nu);
                    let v = Vertex {
                        point,
                        interaction: Interaction::Diffraction { nu },
                    };
                    out.push(self.make_path(
                        PathKind::Diffraction,
                        Complex64::new(amp, 0.0),
                        alloc::vec![v],
                        user,
                    ));
                }
            }
        }
        if self.profile.diffraction_exclusive || self.profile.max_reflections == 0 {
            return out;
        }
        for edge in &self.edges {
            for face in &self.faces {
                if !face.in_front(user) {
                    continue;
                }
                let virtual_user = face.mirror(user);
                let Some((point, nu)) = self.diffraction_point(edge, virtual_user, false) else {
                    continue;
                };
                if !face.in_front(point) {
                    continue;
                }
                let Some(r) = face.plane_crossing(point, virtual_user) else {
                    continue;
                };
                if !face.contains_strict(r) {
                    continue;
                }
                // The reflection point itself must be shadowed by the
                // diffracting building, otherwise this is a plain reflection.
                if !segment_hits_box(self.bs, r, &self.prisms[edge.building], EPS) {
                    continue;
                }
                if !polyline_clear(&[self.bs, point, r, user], &self.prisms) {
                    continue;
                }
                let amp = knife_edge_amplitude(nu);
                let vertices = alloc::vec![
                    Vertex {
                        point,
                        interaction: Interaction::Diffraction { nu },
                    },
                    Vertex {
                        point: r,
                        interaction: Interaction::Reflection {
                            normal: face.normal(),
                        },
                    },
                ];
                out.push(self.make_path(
                    PathKind::DiffractionReflection,
                    self.profile.reflection_coeff * amp,
                    vertices,
                    user,
                ));
            }
        }
        out
    }

    /// Diffraction point on `edge` toward `target` (possibly a mirrored
    /// user) and its Fresnel parameter, when the target lies on the shadow
    /// side of the edge. With `require_cut` the direct BS–target segment
    /// must also be cut by the edge's building.
    fn diffraction_point(&self, edge: &Edge, target: Vec3, require_cut: bool) -> Option<(Vec3, f64)> {
        let bs = self.bs;
        let corner = Vec3::new(edge.x, edge.y, 0.0);
        let r1 = bs.horizontal_distance(corner);
        let r2 = corner.horizontal_distance(target);
        if r1 < EPS || r2 < EPS {
            return None;
        }
        let z = bs.z + (target.z - bs.z) * r1 / (r1 + r2);
        if z <= edge.z[0] + EPS || z >= edge.z[1] - EPS {
            return None;
        }
        let point = Vec3::new(edge.x, edge.y, z);
        let prism = &self.prisms[edge.building];

        // The corner must be a silhouette of its footprint as seen from the BS.
        let ray = point - bs;
        let mut side = 0.0_f64;
        for c in footprint(prism) {
            let s = cross2(ray, c - bs);
            if s.abs() <= 1e-9 * r1.max(1.0) {
                continue;
            }
            if side == 0.0 {
                side = s.signum();
            } else if side != s.signum() {
                return None;
            }
        }
        if side == 0.0 {
            return None;
        }
        // Target beyond the corner, on the building's side of the ray.
        let out = target - point;
        if cross2(ray, out) * side < -1e-9 * r2.max(1.0) {
            return None;
        }
        if ray.x * out.x + ray.y * out.y <= 0.0 {
            return None;
        }
        // The direct (possibly unfolded) line must be cut by that building.
        if require_cut && !segment_hits_box(bs, target, prism, EPS) {
            return None;
        }
        let excess = bs.distance(point) + point.distance(target) - bs.distance(target);
        let nu = fresnel_parameter(excess, self.wavelength, true);
        Some((point, nu))
    }

    /// All paths for one user, strongest first, capped at the scene's path
    /// budget.
    pub fn trace_user(&self, user: Vec3, user_index: usize) -> PathList {
        let mut paths = Vec::new();
        if let Some(p) = self.trace_los(user) {
            paths.push(p);
        }
        paths.extend(self.trace_reflections(user, self.profile.max_reflections));
        paths.extend(self.trace_diffraction(user));
        paths.sort_by(|a, b| b.gain.norm().total_cmp(&a.gain.norm()));
        paths.truncate(self.max_paths);
        PathList { user_index, paths }
    }
}

fn footprint(p: &Prism) -> [Vec3; 4] {
    [
        Vec3::new(p.min.x, p.min.y, 0.0),
        Vec3::new(p.max.x, p.min.y, 0.0),
        Vec3::new(p.max.x, p.max.y, 0.0),
        Vec3::new(p.min.x, p.max.y, 0.0),
    ]
}

/// Cheap pre-filter for face pairs: `next` must have some part in front of
/// `prev`.
fn face_maybe_visible_from(prev: &Face, next: &Face) -> bool {
    let corners = [
        Vec3::ZERO
            .with_component(next.axis, next.coord)
            .with_component(1 - next.axis, next.span[0]),
        Vec3::ZERO
            .with_component(next.axis, next.coord)
            .with_component(1 - next.axis, next.span[1]),
    ];
    corners.iter().any(|c| prev.in_front(*c))
}

fn pow_c(c: Complex64, k: usize) -> Complex64 {
    let mut out = Complex64::new(1.0, 0.0);
    for _ in 0..k {
        out *= c;
    }
    out
}

/// Line of sight in the scene's exact geometry.
pub fn trace_los(scene: &Scene, user: Vec3) -> Option<Path> {
    Tracer::new(scene, &scene.profiles.target).trace_los(user)
}

pub fn trace_reflections(scene: &Scene, user: Vec3, profile: &FidelityProfile, max_order: u8) -> Vec<Path> {
    let mut p = *profile;
    p.max_reflections = max_order;
    Tracer::new(scene, &p).trace_reflections(user, max_order)
}

pub fn trace_diffraction(scene: &Scene, user: Vec3, profile: &FidelityProfile) -> Vec<Path> {
    Tracer::new(scene, profile).trace_diffraction(user)
}

pub fn trace_user(scene: &Scene, user: Vec3, user_index: usize, profile: &FidelityProfile) -> PathList {
    Tracer::new(scene, profile).trace_user(user, user_index)
}

#[cfg(test)]
mod tests;
