//! Simulated environment: base station, building prisms, user grid, and the
//! two fidelity profiles the tracer runs under.
//!
//! Scenes are read from flat `key = value` text. `#` starts a comment.
//! Buildings are indexed keys (`building.3.min.x`). See `docs/scene-format.md`
//! for the full key list.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use crate::math::{abs, floor, Complex64, Vec3, PI, SPEED_OF_LIGHT};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("missing required key `{key}`")]
    Missing { key: String },
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

fn invalid(key: impl Into<String>, reason: impl Into<String>) -> SceneError {
    SceneError::Invalid {
        key: key.into(),
        reason: reason.into(),
    }
}

/// Axis-aligned building box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prism {
    pub min: Vec3,
    pub max: Vec3,
}

impl Prism {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    pub fn height(&self) -> f64 {
        self.max.z - self.min.z
    }

    /// Closed-box containment.
    pub fn contains(&self, p: Vec3) -> bool {
        (0..3).all(|a| p.component(a) >= self.min.component(a) && p.component(a) <= self.max.component(a))
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    /// Copy of this prism shifted horizontally by a pseudo-random offset in
    /// `[-error, error]²`, fixed by `(seed, index)`.
    pub fn displaced(&self, index: usize, error: f64, seed: u64) -> Prism {
        if error == 0.0 {
            return *self;
        }
        let mut state = seed ^ (index as u64).wrapping_mul(0xA24B_AED4_963E_E407);
        let dx = (unit_interval(splitmix64(&mut state)) * 2.0 - 1.0) * error;
        let dy = (unit_interval(splitmix64(&mut state)) * 2.0 - 1.0) * error;
        let shift = Vec3::new(dx, dy, 0.0);
        Prism::new(self.min + shift, self.max + shift)
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn unit_interval(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Regular grid of candidate user positions in the horizontal plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserGrid {
    pub origin: [f64; 2],
    pub extent: [f64; 2],
    pub spacing: f64,
    pub user_height: f64,
}

impl UserGrid {
    /// Candidate count per axis before prism exclusion.
    pub fn dims(&self) -> [usize; 2] {
        let per_axis = |e: f64| floor(e / self.spacing + 1e-9) as usize + 1;
        [per_axis(self.extent[0]), per_axis(self.extent[1])]
    }

    /// Row-major (y outer, x inner) candidate positions.
    pub fn candidates(&self) -> impl Iterator<Item = Vec3> + '_ {
        let [nx, ny] = self.dims();
        (0..ny).flat_map(move |iy| {
            (0..nx).map(move |ix| {
                Vec3::new(
                    self.origin[0] + ix as f64 * self.spacing,
                    self.origin[1] + iy as f64 * self.spacing,
                    self.user_height,
                )
            })
        })
    }

    pub fn contains_horizontal(&self, p: Vec3) -> bool {
        p.x >= self.origin[0]
            && p.x <= self.origin[0] + self.extent[0]
            && p.y >= self.origin[1]
            && p.y <= self.origin[1] + self.extent[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProfileKind {
    Target,
    Baseline,
}

impl ProfileKind {
    pub fn name(self) -> &'static str {
        match self {
            ProfileKind::Target => "target",
            ProfileKind::Baseline => "baseline",
        }
    }
}

/// Interaction budget of one tracer fidelity level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FidelityProfile {
    pub kind: ProfileKind,
    pub max_reflections: u8,
    pub diffraction_enabled: bool,
    /// When set, a path that contains a diffraction contains nothing else.
    pub diffraction_exclusive: bool,
    pub reflection_coeff: Complex64,
    /// Horizontal building-position error of this twin's geometry model, meters.
    pub geometry_error_m: f64,
    pub geometry_seed: u64,
    /// Error of this twin's BS array orientation, a rotation about the
    /// vertical in degrees.
    pub array_yaw_error_deg: f64,
}

pub const DEFAULT_REFLECTION_MAGNITUDE: f64 = 0.6;

impl FidelityProfile {
    pub fn target() -> Self {
        Self {
            kind: ProfileKind::Target,
            max_reflections: 2,
            diffraction_enabled: true,
            diffraction_exclusive: false,
            reflection_coeff: Complex64::from_polar(DEFAULT_REFLECTION_MAGNITUDE, PI),
            geometry_error_m: 0.0,
            geometry_seed: 0,
            array_yaw_error_deg: 0.0,
        }
    }

    pub fn baseline() -> Self {
        Self {
            kind: ProfileKind::Baseline,
            diffraction_exclusive: true,
            geometry_seed: 0x7717_5eed,
            ..Self::target()
        }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let prefix = format!("profile.{}", self.kind.name());
        if self.max_reflections > 3 {
            return Err(invalid(
                format!("{prefix}.max_reflections"),
                "must be in 0..=3",
            ));
        }
        if !(self.reflection_coeff.norm() <= 1.0) {
            return Err(invalid(
                format!("{prefix}.reflection_re"),
                "reflection coefficient magnitude must be <= 1",
            ));
        }
        if !(self.geometry_error_m >= 0.0 && self.geometry_error_m.is_finite()) {
            return Err(invalid(
                format!("{prefix}.geometry_error_m"),
                "must be finite and >= 0",
            ));
        }
        if !(self.array_yaw_error_deg.is_finite() && self.array_yaw_error_deg.abs() <= 90.0) {
            return Err(invalid(
                format!("{prefix}.array_yaw_error_deg"),
                "must be finite and within [-90, 90]",
            ));
        }
        let exclusive_ok = match self.kind {
            ProfileKind::Baseline => self.diffraction_exclusive,
            ProfileKind::Target => !self.diffraction_exclusive,
        };
        if !exclusive_ok {
            return Err(invalid(
                format!("{prefix}.diffraction_exclusive"),
                "baseline must be exclusive, target must not be",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Profiles {
    pub target: FidelityProfile,
    pub baseline: FidelityProfile,
}

impl Default for Profiles {
    fn default() -> Self {
        Self {
            target: FidelityProfile::target(),
            baseline: FidelityProfile::baseline(),
        }
    }
}

impl Profiles {
    pub fn get(&self, kind: ProfileKind) -> &FidelityProfile {
        match kind {
            ProfileKind::Target => &self.target,
            ProfileKind::Baseline => &self.baseline,
        }
    }
}

pub const DEFAULT_ANTENNAS: usize = 32;
pub const DEFAULT_MAX_PATHS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub bs_position: Vec3,
    pub bs_array_axis: Vec3,
    pub carrier_freq_hz: f64,
    pub antennas: usize,
    pub max_paths: usize,
    pub buildings: Vec<Prism>,
    pub grid: UserGrid,
    pub profiles: Profiles,
}

impl Scene {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq_hz
    }

    pub fn inside_any_building(&self, p: Vec3) -> bool {
        self.buildings.iter().any(|b| b.contains(p))
    }

    /// Buildings as seen by the twin running `profile`.
    /// Array axis as modeled by `profile`.
    pub fn array_axis_for(&self, profile: &FidelityProfile) -> Vec3 {
        let a = self.bs_array_axis;
        if profile.array_yaw_error_deg == 0.0 {
            return a;
        }
        let t = profile.array_yaw_error_deg * PI / 180.0;
        let (s, c) = (libm::sin(t), libm::cos(t));
        Vec3::new(c * a.x - s * a.y, s * a.x + c * a.y, a.z)
    }

    pub fn buildings_for(&self, profile: &FidelityProfile) -> Vec<Prism> {
        self.buildings
            .iter()
            .enumerate()
            .map(|(i, b)| b.displaced(i, profile.geometry_error_m, profile.geometry_seed))
            .collect()
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if !self.bs_position.is_finite() || !(self.bs_position.z > 0.0) {
            return Err(invalid("scene.bs.z", "base station height must be > 0"));
        }
        if !(self.carrier_freq_hz > 0.0) || !self.carrier_freq_hz.is_finite() {
            return Err(invalid("scene.carrier_hz", "must be > 0"));
        }
        if abs(self.bs_array_axis.norm() - 1.0) > 1e-12 {
            return Err(invalid("scene.bs.axis", "array axis must have unit norm"));
        }
        if self.antennas == 0 {
            return Err(invalid("scene.bs.antennas", "must be >= 1"));
        }
        if self.max_paths == 0 {
            return Err(invalid("trace.max_paths", "must be >= 1"));
        }
        for (i, b) in self.buildings.iter().enumerate() {
            for (a, name) in ["x", "y", "z"].iter().enumerate() {
                if !(b.min.component(a) < b.max.component(a)) {
                    return Err(invalid(
                        format!("building.{i}.max.{name}"),
                        "max corner must exceed min corner",
                    ));
                }
            }
            if b.contains(self.bs_position) {
                return Err(invalid(
                    format!("building.{i}"),
                    "prism contains the base station",
                ));
            }
        }
        for profile in [&self.profiles.target, &self.profiles.baseline] {
            profile.validate()?;
            for (i, b) in self.buildings_for(profile).iter().enumerate() {
                if b.contains(self.bs_position) {
                    return Err(invalid(
                        format!("profile.{}.geometry_error_m", profile.kind.name()),
                        format!("displaced building {i} contains the base station"),
                    ));
                }
            }
        }
        let g = &self.grid;
        if !(g.spacing > 0.0) || !g.spacing.is_finite() {
            return Err(invalid("grid.spacing", "must be > 0"));
        }
        for (key, e) in [("grid.extent.x", g.extent[0]), ("grid.extent.y", g.extent[1])] {
            if !(e >= 0.0) || !e.is_finite() {
                return Err(invalid(key, "must be finite and >= 0"));
            }
        }
        if !g.user_height.is_finite() {
            return Err(invalid("grid.user_height", "must be finite"));
        }
        Ok(())
    }

    /// Grid users outside every building, in row-major order.
    pub fn enumerate_users(&self) -> Vec<Vec3> {
        let users: Vec<Vec3> = self
            .grid
            .candidates()
            .filter(|p| !self.inside_any_building(*p))
            .collect();
        let [nx, ny] = self.grid.dims();
        let dropped = nx * ny - users.len();
        if dropped > 0 {
            log::info!("excluded {dropped} grid users inside buildings");
        }
        users
    }
}

const KNOWN_SCALARS: &[&str] = &[
    "scene.bs.x",
    "scene.bs.y",
    "scene.bs.z",
    "scene.bs.axis.x",
    "scene.bs.axis.y",
    "scene.bs.axis.z",
    "scene.bs.antennas",
    "scene.carrier_hz",
    "trace.max_paths",
    "grid.origin.x",
    "grid.origin.y",
    "grid.extent.x",
    "grid.extent.y",
    "grid.spacing",
    "grid.user_height",
];

const PROFILE_FIELDS: &[&str] = &[
    "max_reflections",
    "diffraction_enabled",
    "diffraction_exclusive",
    "reflection_re",
    "reflection_im",
    "geometry_error_m",
    "geometry_seed",
    "array_yaw_error_deg",
];

struct Entries {
    map: BTreeMap<String, (String, usize)>,
}

impl Entries {
    fn raw(&self, key: &str) -> Option<&(String, usize)> {
        self.map.get(key)
    }

    fn f64_opt(&self, key: &str) -> Result<Option<f64>, SceneError> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => v.parse::<f64>().map(Some).map_err(|_| SceneError::Parse {
                line: *line,
                message: format!("`{key}`: expected a number, got `{v}`"),
            }),
        }
    }

    fn f64_req(&self, key: &str) -> Result<f64, SceneError> {
        self.f64_opt(key)?.ok_or_else(|| SceneError::Missing {
            key: key.to_string(),
        })
    }

    fn u64_opt(&self, key: &str) -> Result<Option<u64>, SceneError> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => v.parse::<u64>().map(Some).map_err(|_| SceneError::Parse {
                line: *line,
                message: format!("`{key}`: expected a non-negative integer, got `{v}`"),
            }),
        }
    }

    fn bool_opt(&self, key: &str) -> Result<Option<bool>, SceneError> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => match v.as_str() {
                "true" | "1" => Ok(Some(true)),
                "false" | "0" => Ok(Some(false)),
                _ => Err(SceneError::Parse {
                    line: *line,
                    message: format!("`{key}`: expected true/false, got `{v}`"),
                }),
            },
        }
    }
}

fn parse_entries(text: &str) -> Result<Entries, SceneError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| SceneError::Parse {
            line,
            message: format!("expected `key = value`, got `{content}`"),
        })?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() {
            return Err(SceneError::Parse {
                line,
                message: "empty key".to_string(),
            });
        }
        if !is_known_key(key) {
            return Err(SceneError::UnknownKey {
                line,
                key: key.to_string(),
            });
        }
        if map
            .insert(key.to_string(), (value.to_string(), line))
            .is_some()
        {
            return Err(SceneError::DuplicateKey {
                line,
                key: key.to_string(),
            });
        }
    }
    Ok(Entries { map })
}

fn is_known_key(key: &str) -> bool {
    if KNOWN_SCALARS.contains(&key) {
        return true;
    }
    if let Some(rest) = key.strip_prefix("profile.") {
        if let Some((name, field)) = rest.split_once('.') {
            return matches!(name, "target" | "baseline") && PROFILE_FIELDS.contains(&field);
        }
        return false;
    }
    building_key(key).is_some()
}

/// `building.<idx>.<min|max>.<x|y|z>` → index.
fn building_key(key: &str) -> Option<usize> {
    let mut parts = key.split('.');
    if parts.next()? != "building" {
        return None;
    }
    let idx = parts.next()?.parse::<usize>().ok()?;
    let corner = parts.next()?;
    let axis = parts.next()?;
    if parts.next().is_some() || !matches!(corner, "min" | "max") || !matches!(axis, "x" | "y" | "z") {
        return None;
    }
    Some(idx)
}

fn apply_profile_overrides(
    entries: &Entries,
    profile: &mut FidelityProfile,
) -> Result<(), SceneError> {
    let p = format!("profile.{}.", profile.kind.name());
    if let Some(v) = entries.u64_opt(&format!("{p}max_reflections"))? {
        if v > 3 {
            return Err(invalid(format!("{p}max_reflections"), "must be in 0..=3"));
        }
        profile.max_reflections = v as u8;
    }
    if let Some(v) = entries.bool_opt(&format!("{p}diffraction_enabled"))? {
        profile.diffraction_enabled = v;
    }
    if let Some(v) = entries.bool_opt(&format!("{p}diffraction_exclusive"))? {
        profile.diffraction_exclusive = v;
    }
    if let Some(v) = entries.f64_opt(&format!("{p}reflection_re"))? {
        profile.reflection_coeff.re = v;
    }
    if let Some(v) = entries.f64_opt(&format!("{p}reflection_im"))? {
        profile.reflection_coeff.im = v;
    }
    if let Some(v) = entries.f64_opt(&format!("{p}geometry_error_m"))? {
        profile.geometry_error_m = v;
    }
    if let Some(v) = entries.u64_opt(&format!("{p}geometry_seed"))? {
        profile.geometry_seed = v;
    }
    if let Some(v) = entries.f64_opt(&format!("{p}array_yaw_error_deg"))? {
        profile.array_yaw_error_deg = v;
    }
    Ok(())
}

/// Parses and validates a scene config.
pub fn load_scene(text: &str) -> Result<Scene, SceneError> {
    let e = parse_entries(text)?;

    let bs_position = Vec3::new(
        e.f64_req("scene.bs.x")?,
        e.f64_req("scene.bs.y")?,
        e.f64_req("scene.bs.z")?,
    );
    let bs_array_axis = Vec3::new(
        e.f64_opt("scene.bs.axis.x")?.unwrap_or(1.0),
        e.f64_opt("scene.bs.axis.y")?.unwrap_or(0.0),
        e.f64_opt("scene.bs.axis.z")?.unwrap_or(0.0),
    );
    let antennas = e
        .u64_opt("scene.bs.antennas")?
        .map(|v| v as usize)
        .unwrap_or(DEFAULT_ANTENNAS);
    let max_paths = e
        .u64_opt("trace.max_paths")?
        .map(|v| v as usize)
        .unwrap_or(DEFAULT_MAX_PATHS);
    let carrier_freq_hz = e.f64_req("scene.carrier_hz")?;

    let grid = UserGrid {
        origin: [e.f64_req("grid.origin.x")?, e.f64_req("grid.origin.y")?],
        extent: [e.f64_req("grid.extent.x")?, e.f64_req("grid.extent.y")?],
        spacing: e.f64_req("grid.spacing")?,
        user_height: e.f64_opt("grid.user_height")?.unwrap_or(1.5),
    };

    let mut indices: Vec<usize> = e.map.keys().filter_map(|k| building_key(k)).collect();
    indices.dedup();
    let mut buildings = Vec::with_capacity(indices.len());
    for idx in indices {
        let corner = |c: &str| -> Result<Vec3, SceneError> {
            Ok(Vec3::new(
                e.f64_req(&format!("building.{idx}.{c}.x"))?,
                e.f64_req(&format!("building.{idx}.{c}.y"))?,
                e.f64_req(&format!("building.{idx}.{c}.z"))?,
            ))
        };
        buildings.push(Prism::new(corner("min")?, corner("max")?));
    }

    let mut profiles = Profiles::default();
    apply_profile_overrides(&e, &mut profiles.target)?;
    apply_profile_overrides(&e, &mut profiles.baseline)?;

    let scene = Scene {
        bs_position,
        bs_array_axis,
        carrier_freq_hz,
        antennas,
        max_paths,
        buildings,
        grid,
        profiles,
    };
    scene.validate()?;
    if scene.grid.candidates().all(|p| scene.inside_any_building(p)) {
        log::warn!("every grid user lies inside a building; the scene has no users");
    }
    Ok(scene)
}

/// Serializes a scene back to config text that `load_scene` accepts.
pub fn scene_to_config(scene: &Scene) -> String {
    let mut out = String::new();
    let mut put = |k: &str, v: String| {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    };
    put("scene.bs.x", fmt_f64(scene.bs_position.x));
    put("scene.bs.y", fmt_f64(scene.bs_position.y));
    put("scene.bs.z", fmt_f64(scene.bs_position.z));
    put("scene.bs.axis.x", fmt_f64(scene.bs_array_axis.x));
    put("scene.bs.axis.y", fmt_f64(scene.bs_array_axis.y));
    put("scene.bs.axis.z", fmt_f64(scene.bs_array_axis.z));
    put("scene.bs.antennas", format!("{}", scene.antennas));
    put("scene.carrier_hz", fmt_f64(scene.carrier_freq_hz));
    put("trace.max_paths", format!("{}", scene.max_paths));
    put("grid.origin.x", fmt_f64(scene.grid.origin[0]));
    put("grid.origin.y", fmt_f64(scene.grid.origin[1]));
    put("grid.extent.x", fmt_f64(scene.grid.extent[0]));
    put("grid.extent.y", fmt_f64(scene.grid.extent[1]));
    put("grid.spacing", fmt_f64(scene.grid.spacing));
    put("grid.user_height", fmt_f64(scene.grid.user_height));
    for (i, b) in scene.buildings.iter().enumerate() {
        for (c, v) in [("min", b.min), ("max", b.max)] {
            put(&format!("building.{i}.{c}.x"), fmt_f64(v.x));
            put(&format!("building.{i}.{c}.y"), fmt_f64(v.y));
            put(&format!("building.{i}.{c}.z"), fmt_f64(v.z));
        }
    }
    for p in [&scene.profiles.target, &scene.profiles.baseline] {
        let n = p.kind.name();
        put(&format!("profile.{n}.max_reflections"), format!("{}", p.max_reflections));
        put(&format!("profile.{n}.diffraction_enabled"), format!("{}", p.diffraction_enabled));
        put(&format!("profile.{n}.diffraction_exclusive"), format!("{}", p.diffraction_exclusive));
        put(&format!("profile.{n}.reflection_re"), fmt_f64(p.reflection_coeff.re));
        put(&format!("profile.{n}.reflection_im"), fmt_f64(p.reflection_coeff.im));
        put(&format!("profile.{n}.geometry_error_m"), fmt_f64(p.geometry_error_m));
        put(&format!("profile.{n}.geometry_seed"), format!("{}", p.geometry_seed));
        put(&format!("profile.{n}.array_yaw_error_deg"), fmt_f64(p.array_yaw_error_deg));
    }
    out
}

fn fmt_f64(v: f64) -> String {
    // `{:?}` prints the shortest round-tripping representation.
    format!("{v:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_config() -> String {
        "\
# minimal scene
scene.bs.x = 0
scene.bs.y = 0
scene.bs.z = 10
scene.carrier_hz = 3.5e9
grid.origin.x = 0
grid.origin.y = 0
grid.extent.x = 410
grid.extent.y = 320
grid.spacing = 2.5
grid.user_height = 1.5
"
        .to_string()
    }

    #[test]
    fn grid_counts_follow_floor_rule() {
        let scene = load_scene(&base_config()).unwrap();
        assert_eq!(scene.grid.dims(), [165, 129]);
        assert_eq!(scene.enumerate_users().len(), 165 * 129);
    }

    #[test]
    fn zero_buildings_keep_all_users() {
        let scene = load_scene(&base_config()).unwrap();
        assert!(scene.buildings.is_empty());
        let [nx, ny] = scene.grid.dims();
        assert_eq!(scene.enumerate_users().len(), nx * ny);
    }

    #[test]
    fn prism_over_whole_grid_leaves_no_users() {
        let mut cfg = base_config();
        cfg.push_str(
            "building.0.min.x = -1\nbuilding.0.min.y = -1\nbuilding.0.min.z = 0\n\
             building.0.max.x = 500\nbuilding.0.max.y = 400\nbuilding.0.max.z = 5\n",
        );
        let scene = load_scene(&cfg).unwrap();
        assert!(scene.enumerate_users().is_empty());
    }

    #[test]
    fn two_by_two_grid_corners() {
        let cfg = base_config()
            .replace("grid.extent.x = 410", "grid.extent.x = 3")
            .replace("grid.extent.y = 320", "grid.extent.y = 3")
            .replace("grid.spacing = 2.5", "grid.spacing = 3");
        let users = load_scene(&cfg).unwrap().enumerate_users();
        let xy: Vec<(f64, f64)> = users.iter().map(|p| (p.x, p.y)).collect();
        assert_eq!(xy, [(0.0, 0.0), (3.0, 0.0), (0.0, 3.0), (3.0, 3.0)]);
        assert!(users.iter().all(|p| p.z == 1.5));
    }

    #[test]
    fn single_row_grid() {
        let cfg = base_config()
            .replace("grid.extent.x = 410", "grid.extent.x = 4")
            .replace("grid.extent.y = 320", "grid.extent.y = 0")
            .replace("grid.spacing = 2.5", "grid.spacing = 2");
        let xs: Vec<f64> = load_scene(&cfg)
            .unwrap()
            .enumerate_users()
            .iter()
            .map(|p| p.x)
            .collect();
        assert_eq!(xs, [0.0, 2.0, 4.0]);
    }

    #[test]
    fn prism_removes_column() {
        let cfg = base_config()
            .replace("grid.extent.x = 410", "grid.extent.x = 4")
            .replace("grid.extent.y = 320", "grid.extent.y = 4")
            .replace("grid.spacing = 2.5", "grid.spacing = 2")
            + "building.0.min.x = 1\nbuilding.0.min.y = -10\nbuilding.0.min.z = 0\n\
               building.0.max.x = 3\nbuilding.0.max.y = 10\nbuilding.0.max.z = 5\n";
        let users = load_scene(&cfg).unwrap().enumerate_users();
        assert_eq!(users.len(), 6);
        assert!(users.iter().all(|p| p.x != 2.0));
    }

    #[test]
    fn parse_error_reports_line() {
        let cfg = base_config() + "this line has no equals sign\n";
        match load_scene(&cfg) {
            Err(SceneError::Parse { line, .. }) => assert_eq!(line, 12),
            other => panic!("unexpected {other:?}"),
        }
        let cfg = base_config().replace("grid.spacing = 2.5", "grid.spacing = abc");
        assert!(matches!(load_scene(&cfg), Err(SceneError::Parse { line: 10, .. })));
    }

    #[test]
    fn invariant_violations_name_the_key() {
        let cfg = base_config().replace("grid.spacing = 2.5", "grid.spacing = 0");
        assert_eq!(
            load_scene(&cfg).unwrap_err(),
            invalid("grid.spacing", "must be > 0")
        );
        let cfg = base_config().replace("scene.bs.z = 10", "scene.bs.z = -1");
        assert!(matches!(load_scene(&cfg), Err(SceneError::Invalid { key, .. }) if key == "scene.bs.z"));
        let cfg = base_config() + "scene.bs.axis.x = 0.5\n";
        assert!(matches!(load_scene(&cfg), Err(SceneError::Invalid { key, .. }) if key == "scene.bs.axis"));
        let cfg = base_config() + "building.0.min.x = 5\n";
        assert!(matches!(load_scene(&cfg), Err(SceneError::Missing { key }) if key == "building.0.min.y"));
        let cfg = base_config()
            + "building.0.min.x = -5\nbuilding.0.min.y = -5\nbuilding.0.min.z = 0\n\
               building.0.max.x = 5\nbuilding.0.max.y = 5\nbuilding.0.max.z = 20\n";
        assert!(matches!(load_scene(&cfg), Err(SceneError::Invalid { key, .. }) if key == "building.0"));
        let cfg = base_config() + "profile.baseline.diffraction_exclusive = false\n";
        assert!(matches!(load_scene(&cfg), Err(SceneError::Invalid { key, .. })
            if key == "profile.baseline.diffraction_exclusive"));
    }

    #[test]
    fn unknown_and_duplicate_keys() {
        let cfg = base_config() + "grid.spacin = 2\n";
        assert!(matches!(load_scene(&cfg), Err(SceneError::UnknownKey { line: 12, .. })));
        let cfg = base_config() + "grid.spacing = 2\n";
        assert!(matches!(load_scene(&cfg), Err(SceneError::DuplicateKey { line: 12, .. })));
    }

    #[test]
    fn config_round_trip() {
        let cfg = base_config()
            + "building.0.min.x = 10\nbuilding.0.min.y = 10\nbuilding.0.min.z = 0\n\
               building.0.max.x = 20.25\nbuilding.0.max.y = 30\nbuilding.0.max.z = 18\n\
               profile.baseline.geometry_error_m = 0.25\n\
               profile.baseline.array_yaw_error_deg = -2.5\n";
        let scene = load_scene(&cfg).unwrap();
        let again = load_scene(&scene_to_config(&scene)).unwrap();
        assert_eq!(scene, again);
    }

    #[test]
    fn displacement_is_bounded_and_deterministic() {
        let p = Prism::new(Vec3::new(0.0, 0.0, 0.0), Vec3::new(10.0, 10.0, 10.0));
        for i in 0..50 {
            let a = p.displaced(i, 0.5, 9);
            assert_eq!(a, p.displaced(i, 0.5, 9));
            assert!(abs(a.min.x) <= 0.5 && abs(a.min.y) <= 0.5 && a.min.z == 0.0);
            assert!(abs(a.max.x - a.min.x - 10.0) < 1e-12);
        }
        assert_eq!(p.displaced(3, 0.0, 9), p);
    }
}
