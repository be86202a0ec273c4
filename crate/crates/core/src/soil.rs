//! Dielectric and propagation physics of soil.
//!
//! Covers complex permittivity, the apparent dielectric constant `Ka`,
//! plane-wave velocity and attenuation, the Topp moisture relation and its
//! inverse, and layered profiles whose path-averaged `Ka` is what a
//! time-of-flight measurement actually sees.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Vacuum permittivity (F/m).
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Vacuum permeability (H/m).
pub const MU_0: f64 = 1.256_637_062_12e-6;

/// Topp cubic coefficients, constant term first.
pub const TOPP_COEFFICIENTS: [f64; 4] = [-5.3e-2, 2.92e-2, -5.5e-4, 4.3e-6];

/// Search branch for inverting a moisture map. 81 covers pure water.
pub const KA_BRANCH: (f64, f64) = (1.0, 81.0);

/// Upper end of the Ka range the Topp relation was fitted over.
pub const TOPP_FIT_MAX_KA: f64 = 40.0;

/// Complex relative permittivity plus conductivity and permeability of a medium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DielectricState {
    pub eps_real: f64,
    pub eps_imag: f64,
    /// Bulk electrical conductivity (S/m).
    pub sigma: f64,
    pub mu_rel: f64,
}

impl DielectricState {
    pub fn new(eps_real: f64, eps_imag: f64, sigma: f64) -> Result<Self> {
        let state = Self {
            eps_real,
            eps_imag,
            sigma,
            mu_rel: 1.0,
        };
        state.validate()?;
        Ok(state)
    }

    pub fn lossless(eps_real: f64) -> Result<Self> {
        Self::new(eps_real, 0.0, 0.0)
    }

    pub fn with_mu(mut self, mu_rel: f64) -> Result<Self> {
        self.mu_rel = mu_rel;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let eps_real = ensure_finite("eps_real", self.eps_real)?;
        let eps_imag = ensure_finite("eps_imag", self.eps_imag)?;
        let sigma = ensure_finite("sigma", self.sigma)?;
        let mu = ensure_finite("mu_rel", self.mu_rel)?;
        if eps_real < 1.0 {
            return Err(Error::invalid(
                "eps_real",
                format!("must be >= 1, got {eps_real}"),
            ));
        }
        if eps_imag < 0.0 {
            return Err(Error::invalid(
                "eps_imag",
                format!("must be >= 0, got {eps_imag}"),
            ));
        }
        if sigma < 0.0 {
            return Err(Error::invalid(
                "sigma",
                format!("must be >= 0, got {sigma}"),
            ));
        }
        if mu <= 0.0 {
            return Err(Error::invalid("mu_rel", format!("must be > 0, got {mu}")));
        }
        Ok(())
    }

    pub fn is_lossless(&self) -> bool {
        self.sigma == 0.0 && self.eps_imag == 0.0
    }
}

fn check_frequency(f: f64) -> Result<f64> {
    let f = ensure_finite("frequency", f)?;
    if f <= 0.0 {
        return Err(Error::invalid("frequency", format!("must be > 0, got {f}")));
    }
    Ok(f)
}

/// Conductive loss expressed as an equivalent imaginary relative permittivity.
fn loss_term(state: &DielectricState, f: f64) -> f64 {
    state.eps_imag + state.sigma / (2.0 * std::f64::consts::PI * f * EPSILON_0)
}

/// Apparent dielectric constant seen by a travel-time measurement.
///
/// `Ka = ε′/2 · [sqrt(1 + ((ε″ + σ/(2πfε₀))/ε′)²) + 1]`, which collapses to
/// `ε′` for a lossless medium.
pub fn apparent_dielectric(state: &DielectricState, f: f64) -> Result<f64> {
    state.validate()?;
    let f = check_frequency(f)?;
    let ratio = loss_term(state, f) / state.eps_real;
    Ok(state.eps_real / 2.0 * ((1.0 + ratio * ratio).sqrt() + 1.0))
}

/// Phase velocity of a plane wave (m/s).
///
/// Uses the loss tangent `σ/(ωε₀ε′)` inside the root; with `σ = 0` and
/// `μ = 1` this is exactly `c/√ε′`.
pub fn wave_velocity(state: &DielectricState, f: f64) -> Result<f64> {
    state.validate()?;
    let f = check_frequency(f)?;
    let omega = 2.0 * std::f64::consts::PI * f;
    if state.sigma == 0.0 && state.mu_rel == 1.0 {
        return Ok(SPEED_OF_LIGHT / state.eps_real.sqrt());
    }
    let tan = state.sigma / (omega * EPSILON_0 * state.eps_real);
    let inner = state.mu_rel * state.eps_real / 2.0 * (1.0 + (1.0 + tan * tan).sqrt());
    Ok(SPEED_OF_LIGHT / inner.sqrt())
}

/// Plane-wave field attenuation constant (Np/m).
pub fn attenuation_constant(state: &DielectricState, f: f64) -> Result<f64> {
    state.validate()?;
    let f = check_frequency(f)?;
    if state.is_lossless() {
        return Ok(0.0);
    }
    let omega = 2.0 * std::f64::consts::PI * f;
    let eps = state.eps_real * EPSILON_0;
    let mu = state.mu_rel * MU_0;
    let sigma_eff = state.sigma + omega * EPSILON_0 * state.eps_imag;
    let tan = sigma_eff / (omega * eps);
    // sqrt(1+x²)-1 computed as x²/(sqrt(1+x²)+1) to stay accurate for tiny losses
    let t2 = tan * tan;
    let excess = t2 / ((1.0 + t2).sqrt() + 1.0);
    Ok(omega * (mu * eps / 2.0 * excess).sqrt())
}

fn cubic(coefficients: &[f64; 4], x: f64) -> f64 {
    coefficients[0] + x * (coefficients[1] + x * (coefficients[2] + x * coefficients[3]))
}

/// Unclamped Topp cubic.
pub fn topp_raw(ka: f64) -> f64 {
    cubic(&TOPP_COEFFICIENTS, ka)
}

/// Volumetric water content from the Topp relation, clamped to `[0, 1]`.
pub fn topp_vwc(ka: f64) -> Result<f64> {
    let ka = ensure_finite("Ka", ka)?;
    if ka < 1.0 {
        return Err(Error::invalid("Ka", format!("must be >= 1, got {ka}")));
    }
    Ok(topp_raw(ka).clamp(0.0, 1.0))
}

/// How a texture turns `Ka` into volumetric water content.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum VwcMap {
    Topp,
    /// Cubic in Ka, constant term first.
    CalibratedCubic([f64; 4]),
}

impl VwcMap {
    pub fn coefficients(&self) -> [f64; 4] {
        match self {
            VwcMap::Topp => TOPP_COEFFICIENTS,
            VwcMap::CalibratedCubic(c) => *c,
        }
    }

    /// Clamped moisture for `ka`.
    pub fn theta(&self, ka: f64) -> Result<f64> {
        match self {
            VwcMap::Topp => topp_vwc(ka),
            VwcMap::CalibratedCubic(c) => {
                let ka = ensure_finite("Ka", ka)?;
                if ka < 1.0 {
                    return Err(Error::invalid("Ka", format!("must be >= 1, got {ka}")));
                }
                Ok(cubic(c, ka).clamp(0.0, 1.0))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextureKind {
    SandyClayLoam,
    SiltLoam,
    ClayLoam,
    PottingSoil,
    Custom,
}

impl TextureKind {
    /// Default `(theta_sat, ec_sat)` for the named textures.
    fn defaults(self) -> Option<(f64, f64)> {
        match self {
            TextureKind::SandyClayLoam => Some((0.40, 0.075)),
            TextureKind::SiltLoam => Some((0.45, 0.12)),
            TextureKind::ClayLoam => Some((0.48, 0.20)),
            // saturated EC ten times that of sandy clay loam
            TextureKind::PottingSoil => Some((0.60, 0.75)),
            TextureKind::Custom => None,
        }
    }
}

/// Serialized form of a texture: a name plus optional overrides.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct TextureSpec {
    name: TextureKind,
    theta_sat: Option<f64>,
    ec_sat: Option<f64>,
    vwc_map: Option<VwcMap>,
}

impl TryFrom<TextureSpec> for SoilTexture {
    type Error = Error;

    fn try_from(spec: TextureSpec) -> Result<Self> {
        let defaults = spec.name.defaults();
        let (theta_sat, ec_sat) = match (defaults, spec.theta_sat, spec.ec_sat) {
            (_, Some(t), Some(e)) => (t, e),
            (Some((t, _)), None, Some(e)) => (t, e),
            (Some((_, e)), Some(t), None) => (t, e),
            (Some(d), None, None) => d,
            (None, _, _) => {
                return Err(Error::invalid(
                    "texture",
                    "custom texture needs theta_sat and ec_sat",
                ))
            }
        };
        let texture = SoilTexture {
            name: spec.name,
            theta_sat,
            ec_sat,
            vwc_map: spec.vwc_map.unwrap_or(VwcMap::Topp),
        };
        texture.validate()?;
        Ok(texture)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TextureSpec")]
pub struct SoilTexture {
    pub name: TextureKind,
    /// Saturation volumetric water content.
    pub theta_sat: f64,
    /// Bulk conductivity at saturation (S/m).
    pub ec_sat: f64,
    pub vwc_map: VwcMap,
}

impl SoilTexture {
    pub fn named(kind: TextureKind) -> Result<Self> {
        let (theta_sat, ec_sat) = kind
            .defaults()
            .ok_or_else(|| Error::invalid("texture", "custom texture has no defaults"))?;
        Ok(Self {
            name: kind,
            theta_sat,
            ec_sat,
            vwc_map: VwcMap::Topp,
        })
    }

    pub fn sandy_clay_loam() -> Self {
        Self::named(TextureKind::SandyClayLoam).expect("named texture")
    }

    pub fn silt_loam() -> Self {
        Self::named(TextureKind::SiltLoam).expect("named texture")
    }

    pub fn clay_loam() -> Self {
        Self::named(TextureKind::ClayLoam).expect("named texture")
    }

    pub fn potting_soil() -> Self {
        Self::named(TextureKind::PottingSoil).expect("named texture")
    }

    pub fn custom(theta_sat: f64, ec_sat: f64, vwc_map: VwcMap) -> Result<Self> {
        let t = Self {
            name: TextureKind::Custom,
            theta_sat,
            ec_sat,
            vwc_map,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let theta_sat = ensure_finite("theta_sat", self.theta_sat)?;
        let ec_sat = ensure_finite("ec_sat", self.ec_sat)?;
        if !(theta_sat > 0.0 && theta_sat < 1.0) {
            return Err(Error::invalid(
                "theta_sat",
                format!("must be in (0,1), got {theta_sat}"),
            ));
        }
        if ec_sat < 0.0 {
            return Err(Error::invalid(
                "ec_sat",
                format!("must be >= 0, got {ec_sat}"),
            ));
        }
        if let VwcMap::CalibratedCubic(c) = self.vwc_map {
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("vwc_map", "coefficients must be finite"));
            }
        }
        Ok(())
    }

    /// Bulk conductivity at moisture `theta`, linear from dry to saturation.
    pub fn conductivity(&self, theta: f64) -> f64 {
        self.ec_sat * theta / self.theta_sat
    }
}

/// Inverts the texture's moisture map: the smallest `Ka` on the branch whose
/// clamped moisture reaches `theta`.
pub fn vwc_to_ka(theta: f64, texture: &SoilTexture) -> Result<f64> {
    let theta = ensure_finite("theta", theta)?;
    if theta < 0.0 || theta > texture.theta_sat {
        return Err(Error::invalid(
            "theta",
            format!("must be in [0, {}], got {theta}", texture.theta_sat),
        ));
    }
    let map = texture.vwc_map;
    let (mut lo, mut hi) = KA_BRANCH;
    if map.theta(lo)? >= theta {
        return Ok(lo);
    }
    if map.theta(hi)? < theta {
        return Err(Error::NoRoot { theta, lo, hi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if map.theta(mid)? >= theta {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    Ok(hi)
}

/// One-way time of flight (s) through `distance` metres of a medium with `ka`.
pub fn one_way_tof(distance: f64, ka: f64) -> Result<f64> {
    let distance = ensure_finite("distance", distance)?;
    let ka = ensure_finite("Ka", ka)?;
    if distance < 0.0 {
        return Err(Error::invalid(
            "distance",
            format!("must be >= 0, got {distance}"),
        ));
    }
    if ka < 1.0 {
        return Err(Error::invalid("Ka", format!("must be >= 1, got {ka}")));
    }
    Ok(distance * ka.sqrt() / SPEED_OF_LIGHT)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SoilLayer {
    /// Layer thickness (m).
    pub thickness: f64,
    /// Volumetric water content.
    pub theta: f64,
    pub texture: SoilTexture,
    /// Replaces the texture's conductivity coupling for this layer (S/m).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

impl SoilLayer {
    pub fn new(thickness: f64, theta: f64, texture: SoilTexture) -> Self {
        Self {
            thickness,
            theta,
            texture,
            sigma: None,
        }
    }

    pub fn ka(&self) -> Result<f64> {
        vwc_to_ka(self.theta, &self.texture)
    }

    pub fn conductivity(&self) -> f64 {
        self.sigma
            .unwrap_or_else(|| self.texture.conductivity(self.theta))
    }

    /// Dielectric state at `f` whose apparent dielectric constant equals the
    /// layer's `Ka`, given its conductivity.
    pub fn dielectric_state(&self, f: f64) -> Result<DielectricState> {
        let f = check_frequency(f)?;
        let ka = self.ka()?;
        let sigma = self.conductivity();
        let loss = sigma / (2.0 * std::f64::consts::PI * f * EPSILON_0);
        // inverse of the apparent-dielectric relation for ε″ = 0
        let eps_real = (ka - loss * loss / (4.0 * ka)).max(1.0);
        DielectricState::new(eps_real, 0.0, sigma)
    }
}

/// Layered soil, top layer at the surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SoilProfile {
    pub layers: Vec<SoilLayer>,
}

impl SoilProfile {
    pub fn new(layers: Vec<SoilLayer>) -> Result<Self> {
        let p = Self { layers };
        p.validate()?;
        Ok(p)
    }

    pub fn uniform(thickness: f64, theta: f64, texture: SoilTexture) -> Result<Self> {
        Self::new(vec![SoilLayer::new(thickness, theta, texture)])
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::invalid("profile.layers", "must not be empty"));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            layer.texture.validate()?;
            let thickness = ensure_finite("layer.thickness", layer.thickness)?;
            if thickness <= 0.0 {
                return Err(Error::invalid(
                    format!("profile.layers[{i}].thickness"),
                    format!("must be > 0, got {thickness}"),
                ));
            }
            let theta = ensure_finite("layer.theta", layer.theta)?;
            if theta < 0.0 || theta > layer.texture.theta_sat {
                return Err(Error::invalid(
                    format!("profile.layers[{i}].theta"),
                    format!("must be in [0, {}], got {theta}", layer.texture.theta_sat),
                ));
            }
            if let Some(s) = layer.sigma {
                if !s.is_finite() || s < 0.0 {
                    return Err(Error::invalid(
                        format!("profile.layers[{i}].sigma"),
                        format!("must be finite and >= 0, got {s}"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn total_thickness(&self) -> f64 {
        self.layers.iter().map(|l| l.thickness).sum()
    }

    /// Layers clipped to `[0, depth]`, as `(layer, thickness within span)`.
    pub fn segments(&self, depth: f64) -> Result<Vec<(&SoilLayer, f64)>> {
        let depth = ensure_finite("depth", depth)?;
        let total = self.total_thickness();
        if depth < 0.0 {
            return Err(Error::invalid(
                "depth",
                format!("must be >= 0, got {depth}"),
            ));
        }
        if depth > total * (1.0 + 1e-12) {
            return Err(Error::DepthExceedsProfile { depth, total });
        }
        let mut remaining = depth;
        let mut out = Vec::new();
        for layer in &self.layers {
            if remaining <= 0.0 {
                break;
            }
            let t = layer.thickness.min(remaining);
            out.push((layer, t));
            remaining -= t;
        }
        Ok(out)
    }

    /// One-way field attenuation `∫α dz` (nepers) from the surface to `depth`.
    pub fn path_attenuation(&self, depth: f64, f: f64) -> Result<f64> {
        let mut total = 0.0;
        for (layer, t) in self.segments(depth)? {
            total += attenuation_constant(&layer.dielectric_state(f)?, f)? * t;
        }
        Ok(total)
    }
}

/// Path-averaged `Ka` over `[0, depth]`: `√Ka_eff` is the thickness-weighted
/// mean of the per-layer `√Ka`, so travel time through the stack equals
/// travel time through a uniform medium of `Ka_eff`.
pub fn profile_effective_ka(profile: &SoilProfile, depth: f64) -> Result<f64> {
    profile.validate()?;
    let segments = profile.segments(depth)?;
    if depth == 0.0 {
        return profile.layers[0].ka();
    }
    let mut weighted = 0.0;
    for (layer, t) in segments {
        weighted += t * layer.ka()?.sqrt();
    }
    let root = weighted / depth;
    Ok(root * root)
}
