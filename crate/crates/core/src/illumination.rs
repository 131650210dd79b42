//! Sun occlusion by ray casting against the spherical chief, and per-point
//! Blinn-Phong shading with a brightness window.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::IlluminationError;

/// Radicand magnitude below which a ray is treated as tangent (no hit).
pub const TANGENT_TOLERANCE: f64 = 1e-9;
/// Shadow-ray origin lift as a fraction of the chief radius.
pub const SHADOW_RAY_LIFT: f64 = 1e-6;

/// Distance along `direction` (in units of `direction`'s length) to the
/// first forward intersection with the sphere, if any.
///
/// Tangent rays, where the discriminant vanishes, do not intersect.
pub fn ray_sphere_intersect(
    origin: &Vector3<f64>,
    direction: &Vector3<f64>,
    center: &Vector3<f64>,
    radius: f64,
) -> Result<Option<f64>, IlluminationError> {
    let qq = direction.norm_squared();
    if qq == 0.0 || !qq.is_finite() {
        return Err(IlluminationError::ZeroDirection);
    }
    let oc = origin - center;
    let b = 2.0 * direction.dot(&oc);
    let c = oc.norm_squared() - radius * radius;
    let radicand = b * b - 4.0 * qq * c;
    if radicand <= TANGENT_TOLERANCE {
        return Ok(None);
    }
    let sqrt_r = radicand.sqrt();
    let near = (-b - sqrt_r) / (2.0 * qq);
    let far = (-b + sqrt_r) / (2.0 * qq);
    Ok(if near > 0.0 {
        Some(near)
    } else if far > 0.0 {
        Some(far)
    } else {
        None
    })
}

/// True when the segment from a surface point toward the Sun leaves the
/// chief without re-entering it.
pub fn is_point_lit(point: &Vector3<f64>, sun_dir: &Vector3<f64>, radius: f64) -> bool {
    let origin = point + sun_dir * (SHADOW_RAY_LIFT * radius);
    matches!(
        ray_sphere_intersect(&origin, sun_dir, &Vector3::zeros(), radius),
        Ok(None)
    )
}

/// Normalized RGB triple.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Rgb(pub [f64; 3]);

impl Rgb {
    pub const fn splat(v: f64) -> Self {
        Self([v, v, v])
    }

    pub fn channels(&self) -> &[f64; 3] {
        &self.0
    }

    fn map(self, f: impl Fn(f64) -> f64) -> Self {
        Self(self.0.map(f))
    }

    fn zip(self, other: Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self([
            f(self.0[0], other.0[0]),
            f(self.0[1], other.0[1]),
            f(self.0[2], other.0[2]),
        ])
    }
}

/// Reflection constants of the chief surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceMaterial {
    pub ambient: Rgb,
    pub diffuse: Rgb,
    pub specular: Rgb,
    pub shininess: f64,
}

impl Default for SurfaceMaterial {
    /// Shiny grey panel.
    fn default() -> Self {
        Self {
            ambient: Rgb::splat(0.4),
            diffuse: Rgb::splat(0.1),
            specular: Rgb::splat(1.0),
            shininess: 100.0,
        }
    }
}

/// Intensities of the single light source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LightSource {
    pub ambient: Rgb,
    pub diffuse: Rgb,
    pub specular: Rgb,
}

impl Default for LightSource {
    fn default() -> Self {
        Self {
            ambient: Rgb::splat(1.0),
            diffuse: Rgb::splat(1.0),
            specular: Rgb::splat(1.0),
        }
    }
}

/// Per-channel brightness window a shaded point must fall inside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BrightnessWindow {
    pub dark: f64,
    pub bright: f64,
}

impl Default for BrightnessWindow {
    fn default() -> Self {
        Self {
            dark: 0.2,
            bright: 0.83,
        }
    }
}

impl BrightnessWindow {
    pub fn contains(&self, rgb: &Rgb) -> bool {
        rgb.0.iter().all(|c| *c >= self.dark && *c <= self.bright)
    }
}

/// Clamped Blinn-Phong colour of a chief surface point seen from `agent_pos`.
pub fn blinn_phong_rgb(
    point: &Vector3<f64>,
    agent_pos: &Vector3<f64>,
    sun_dir: &Vector3<f64>,
    material: &SurfaceMaterial,
    light: &LightSource,
) -> Rgb {
    let normal = point.normalize();
    let to_light = sun_dir.normalize();
    let to_viewer = (agent_pos - point).normalize();
    let diffuse = to_light.dot(&normal).max(0.0);
    let half = to_light + to_viewer;
    let half_norm = half.norm();
    let specular = if half_norm > 1e-12 {
        (normal.dot(&half) / half_norm).max(0.0).powf(material.shininess)
    } else {
        0.0
    };
    let ambient = material.ambient.zip(light.ambient, |k, i| k * i);
    let diffuse = material.diffuse.zip(light.diffuse, |k, i| k * i * diffuse);
    let specular = material.specular.zip(light.specular, |k, i| k * i * specular);
    ambient
        .zip(diffuse, |a, b| a + b)
        .zip(specular, |a, b| a + b)
        .map(|c| c.clamp(0.0, 1.0))
}

/// Which illumination criterion marks a point inspected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IlluminationMode {
    /// Any unoccluded point counts.
    #[default]
    Binary,
    /// Unoccluded and shaded inside the brightness window.
    Spectral,
}

impl std::str::FromStr for IlluminationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "binary" => Ok(Self::Binary),
            "spectral" => Ok(Self::Spectral),
            other => Err(format!("unknown illumination mode `{other}` (binary|spectral)")),
        }
    }
}

impl std::fmt::Display for IlluminationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Binary => "binary",
            Self::Spectral => "spectral",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IlluminationVerdict {
    pub occluded: bool,
    /// Only computed in spectral mode for unoccluded points.
    pub rgb: Option<Rgb>,
    pub inspectable: bool,
}

/// Mode plus the shading constants it needs.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IlluminationModel {
    pub mode: IlluminationMode,
    #[serde(default)]
    pub material: SurfaceMaterial,
    #[serde(default)]
    pub light: LightSource,
    #[serde(default)]
    pub window: BrightnessWindow,
}

impl IlluminationModel {
    pub fn binary() -> Self {
        Self::default()
    }

    pub fn spectral() -> Self {
        Self {
            mode: IlluminationMode::Spectral,
            ..Self::default()
        }
    }

    pub fn with_mode(mode: IlluminationMode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }

    /// Classifies a point already known to be inside the perception cone.
    pub fn classify(
        &self,
        point: &Vector3<f64>,
        agent_pos: &Vector3<f64>,
        sun_dir: &Vector3<f64>,
        radius: f64,
    ) -> IlluminationVerdict {
        classify_point(
            point,
            agent_pos,
            sun_dir,
            radius,
            self.mode,
            &self.material,
            &self.light,
            &self.window,
        )
    }
}

#[allow(clippy::too_many_arguments)]
pub fn classify_point(
    point: &Vector3<f64>,
    agent_pos: &Vector3<f64>,
    sun_dir: &Vector3<f64>,
    radius: f64,
    mode: IlluminationMode,
    material: &SurfaceMaterial,
    light: &LightSource,
    window: &BrightnessWindow,
) -> IlluminationVerdict {
    if !is_point_lit(point, sun_dir, radius) {
        return IlluminationVerdict {
            occluded: true,
            rgb: None,
            inspectable: false,
        };
    }
    match mode {
        IlluminationMode::Binary => IlluminationVerdict {
            occluded: false,
            rgb: None,
            inspectable: true,
        },
        IlluminationMode::Spectral => {
            let rgb = blinn_phong_rgb(point, agent_pos, sun_dir, material, light);
            IlluminationVerdict {
                occluded: false,
                rgb: Some(rgb),
                inspectable: window.contains(&rgb),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn v(x: f64, y: f64, z: f64) -> Vector3<f64> {
        Vector3::new(x, y, z)
    }

    #[test]
    fn axis_aligned_hit() {
        let d = ray_sphere_intersect(&v(-20.0, 0.0, 0.0), &v(1.0, 0.0, 0.0), &v(0.0, 0.0, 0.0), 1.0)
            .unwrap();
        assert_relative_eq!(d.unwrap(), 19.0, epsilon = 1e-12);
    }

    #[test]
    fn unnormalized_direction_scales_distance() {
        let d = ray_sphere_intersect(&v(-20.0, 0.0, 0.0), &v(2.0, 0.0, 0.0), &v(0.0, 0.0, 0.0), 1.0)
            .unwrap();
        assert_relative_eq!(d.unwrap(), 9.5, epsilon = 1e-12);
    }

    #[test]
    fn tangent_is_no_hit() {
        let d = ray_sphere_intersect(&v(0.0, 10.0, 0.0), &v(1.0, 0.0, 0.0), &v(0.0, 0.0, 0.0), 10.0)
            .unwrap();
        assert_eq!(d, None);
    }

    #[test]
    fn behind_origin_is_no_hit() {
        let d = ray_sphere_intersect(&v(20.0, 0.0, 0.0), &v(1.0, 0.0, 0.0), &v(0.0, 0.0, 0.0), 1.0)
            .unwrap();
        assert_eq!(d, None);
    }

    #[test]
    fn inside_origin_hits_exit() {
        let d = ray_sphere_intersect(&v(0.0, 0.0, 0.0), &v(0.0, 0.0, 1.0), &v(0.0, 0.0, 0.0), 3.0)
            .unwrap();
        assert_relative_eq!(d.unwrap(), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_direction_rejected() {
        assert_eq!(
            ray_sphere_intersect(&v(1.0, 0.0, 0.0), &v(0.0, 0.0, 0.0), &v(0.0, 0.0, 0.0), 1.0),
            Err(IlluminationError::ZeroDirection)
        );
    }

    #[test]
    fn sun_facing_and_anti_sun_points() {
        let sun = v(1.0, 0.0, 0.0);
        assert!(is_point_lit(&v(10.0, 0.0, 0.0), &sun, 10.0));
        assert!(!is_point_lit(&v(-10.0, 0.0, 0.0), &sun, 10.0));
    }

    #[test]
    fn head_on_specular_saturates() {
        let m = SurfaceMaterial::default();
        let l = LightSource::default();
        let rgb = blinn_phong_rgb(&v(10.0, 0.0, 0.0), &v(100.0, 0.0, 0.0), &v(1.0, 0.0, 0.0), &m, &l);
        assert_eq!(rgb, Rgb::splat(1.0));
        assert!(!BrightnessWindow::default().contains(&rgb));
    }

    #[test]
    fn ambient_only_limit() {
        let m = SurfaceMaterial::default();
        let l = LightSource::default();
        // light grazing the surface, viewer on the opposite side of the normal
        let rgb = blinn_phong_rgb(&v(10.0, 0.0, 0.0), &v(-10.0, 50.0, 0.0), &v(0.0, 1.0, 0.0), &m, &l);
        for c in rgb.0 {
            assert_relative_eq!(c, 0.4, epsilon = 1e-12);
        }
        assert!(BrightnessWindow::default().contains(&rgb));
    }

    #[test]
    fn black_body() {
        let m = SurfaceMaterial {
            ambient: Rgb::splat(0.0),
            diffuse: Rgb::splat(0.0),
            specular: Rgb::splat(0.0),
            shininess: 100.0,
        };
        let rgb = blinn_phong_rgb(
            &v(0.0, 10.0, 0.0),
            &v(30.0, 30.0, 0.0),
            &v(0.6, 0.8, 0.0),
            &m,
            &LightSource::default(),
        );
        assert_eq!(rgb, Rgb::splat(0.0));
    }

    #[test]
    fn opposite_light_and_viewer_drops_specular() {
        let m = SurfaceMaterial::default();
        let l = LightSource::default();
        let p = v(0.0, 0.0, 10.0);
        let agent = p + v(-5.0, 0.0, 0.0);
        let rgb = blinn_phong_rgb(&p, &agent, &v(1.0, 0.0, 0.0), &m, &l);
        assert!(rgb.0.iter().all(|c| c.is_finite()));
        assert_relative_eq!(rgb.0[0], 0.4, epsilon = 1e-12);
    }

    #[test]
    fn classify_modes() {
        let p = v(10.0, 0.0, 0.0);
        let agent = v(100.0, 0.0, 0.0);
        let sun = v(1.0, 0.0, 0.0);
        let bin = IlluminationModel::binary().classify(&p, &agent, &sun, 10.0);
        assert!(bin.inspectable && !bin.occluded && bin.rgb.is_none());
        let spec = IlluminationModel::spectral().classify(&p, &agent, &sun, 10.0);
        assert!(!spec.inspectable && !spec.occluded);
        let dark = IlluminationModel::spectral().classify(&v(-10.0, 0.0, 0.0), &v(-100.0, 0.0, 0.0), &sun, 10.0);
        assert!(dark.occluded && !dark.inspectable && dark.rgb.is_none());
    }

    #[test]
    fn mode_parses() {
        assert_eq!("spectral".parse::<IlluminationMode>(), Ok(IlluminationMode::Spectral));
        assert!("lambert".parse::<IlluminationMode>().is_err());
    }
}
