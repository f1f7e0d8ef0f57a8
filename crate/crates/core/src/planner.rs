//! Variable-height ("angled") layer planning for a bent-tube part.
//!
//! The part is modeled as a 1-D radial height profile: each motion segment
//! sits at a fixed distance `r` from the rotation center, and tilting the
//! slicing plane by a small angle θ asks segment `k` for a deposit of
//! `r_k · θ`. The feasible θ is capped by the process envelope: the tallest
//! required bead (at `r_max`) must not exceed `dh_max`, and the shortest
//! (at `r_min`) must still reach `dh_min`.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::controller::VelocityProfile;
use crate::error::{Error, Result};
use crate::model::{ModelCoefficients, ProcessBounds};

/// Bent-tube part description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartSpec {
    /// Tube diameter, mm.
    pub tube_diameter: f64,
    /// Distance from the bend axis to the tube center, mm.
    pub bend_radius: f64,
    /// Total bend angle, radians.
    pub final_angle: f64,
    /// Height of the straight section welded before tilting begins, mm.
    pub base_height: f64,
}

impl PartSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.tube_diameter > 0.0) || !self.tube_diameter.is_finite() {
            return Err(Error::Config(format!(
                "tube_diameter must be positive, got {}",
                self.tube_diameter
            )));
        }
        if !(self.bend_radius > self.tube_diameter / 2.0) {
            return Err(Error::Config(format!(
                "bend_radius ({}) must exceed the tube radius ({}); the rotation \
                 center has to lie outside the cross-section",
                self.bend_radius,
                self.tube_diameter / 2.0
            )));
        }
        if !(self.final_angle > 0.0 && self.final_angle <= std::f64::consts::FRAC_PI_2) {
            return Err(Error::Config(format!(
                "final_angle must be in (0, pi/2], got {}",
                self.final_angle
            )));
        }
        if !(self.base_height >= 0.0) || !self.base_height.is_finite() {
            return Err(Error::Config(format!(
                "base_height must be non-negative, got {}",
                self.base_height
            )));
        }
        Ok(())
    }
}

/// Slicing-plane geometry derived from a part.
///
/// Coordinates are measured along the slicing plane from the bend axis, so
/// the rotation center sits at 0 and segment `k` at `r_of_segment[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceGeometry {
    /// Rotation-center coordinate in the slicing plane, mm.
    pub p_rot: f64,
    /// Part extent perpendicular to the rotation axis, mm.
    pub l: f64,
    /// Per-layer tilt increment, radians. Zero until resolved against
    /// process bounds (see [`max_angle_increment`]); a positive value set
    /// up front overrides the derived maximum.
    pub theta_step: f64,
    /// Segment distances from the rotation center, mm.
    pub r_of_segment: Vec<f64>,
}

/// Samples segment positions across the tube's radial extent.
pub fn compute_slice_geometry(part: &PartSpec, n_segments: usize) -> Result<SliceGeometry> {
    part.validate()?;
    if n_segments < 2 {
        return Err(Error::Config(format!(
            "need at least 2 motion segments, got {n_segments}"
        )));
    }
    let r_inner = part.bend_radius - part.tube_diameter / 2.0;
    let span = part.tube_diameter;
    let r_of_segment: Vec<f64> = (0..n_segments)
        .map(|k| r_inner + span * k as f64 / (n_segments - 1) as f64)
        .collect();
    Ok(SliceGeometry {
        p_rot: 0.0,
        l: part.tube_diameter,
        theta_step: 0.0,
        r_of_segment,
    })
}

/// Largest per-layer tilt compatible with the deposition-height envelope.
///
/// θ = dh_max / r_max makes the tallest required bead exactly the tallest
/// achievable one; the inner segments must still clear dh_min at that tilt,
/// otherwise no positive θ works at all and the part is outside the
/// process envelope.
pub fn max_angle_increment(geom: &SliceGeometry, bounds: &ProcessBounds) -> Result<f64> {
    let r_max = geom
        .r_of_segment
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let r_min = geom
        .r_of_segment
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if !(r_min > 0.0) {
        return Err(Error::Config(
            "segment distances must be positive; geometry is unresolved".into(),
        ));
    }
    let theta = bounds.dh_max / r_max;
    let inner_deposit = r_min * theta;
    if inner_deposit < bounds.dh_min - 1e-12 {
        // Any larger theta overshoots dh_max at r_max; any smaller theta
        // starves the inner segments even more. No feasible tilt exists.
        return Err(Error::GeometryInfeasible(format!(
            "innermost segment would receive {:.4} mm at the maximum tilt, below the \
             {:.4} mm process floor (height ratio {:.4} exceeds radius ratio {:.4})",
            inner_deposit,
            bounds.dh_min,
            bounds.dh_min / bounds.dh_max,
            r_min / r_max
        )));
    }
    Ok(theta)
}

/// One layer of the nominal plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerPlan {
    /// 1-based layer number.
    pub layer_index: usize,
    /// Segment coordinates along the deposition path, mm.
    pub segment_positions: Vec<f64>,
    /// Desired cumulative height after this layer, mm.
    pub h_d: Vec<f64>,
    /// Nominal deposition of this layer, mm.
    pub dh_nom: Vec<f64>,
}

/// Layer arithmetic of a plan before the per-segment vectors are built.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanShape {
    pub n_base_layers: usize,
    pub n_tilted_layers: usize,
    /// Tilt applied by each tilted layer, radians.
    pub theta_eff: f64,
    /// Deposit of each base layer, mm.
    pub dh_base: f64,
}

/// Resolves how many layers a part needs and the per-layer quantities,
/// validating feasibility against the height envelope.
///
/// The bend angle is divided evenly over `ceil(final_angle / θ)` layers
/// rather than welding full-θ layers plus a thin remainder: a remainder
/// layer below the deposition floor would be unmanufacturable, while the
/// even split keeps every layer inside the envelope and still reaches the
/// exact final angle. The base section is split the same way.
pub fn plan_shape(
    part: &PartSpec,
    geom: &SliceGeometry,
    bounds: &ProcessBounds,
) -> Result<PlanShape> {
    part.validate()?;
    let theta_cap = max_angle_increment(geom, bounds)?;
    let theta_max = if geom.theta_step > 0.0 {
        if geom.theta_step > theta_cap + 1e-12 {
            return Err(Error::GeometryInfeasible(format!(
                "requested tilt increment {:.6} rad exceeds the feasible maximum {:.6} rad",
                geom.theta_step, theta_cap
            )));
        }
        geom.theta_step
    } else {
        theta_cap
    };

    let r_min = geom
        .r_of_segment
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);

    let n_tilted = (part.final_angle / theta_max - 1e-12).ceil().max(1.0) as usize;
    let theta_eff = part.final_angle / n_tilted as f64;
    if r_min * theta_eff < bounds.dh_min - 1e-12 {
        return Err(Error::GeometryInfeasible(format!(
            "bend of {:.4} rad cannot be split into layers inside the height envelope: \
             {} layers of {:.6} rad would deposit {:.4} mm at the inner edge, below {:.4} mm",
            part.final_angle,
            n_tilted,
            theta_eff,
            r_min * theta_eff,
            bounds.dh_min
        )));
    }

    let (n_base, dh_base) = if part.base_height > 0.0 {
        let n_base = (part.base_height / bounds.dh_max - 1e-12).ceil().max(1.0) as usize;
        let dh_base = part.base_height / n_base as f64;
        if dh_base < bounds.dh_min - 1e-12 {
            return Err(Error::GeometryInfeasible(format!(
                "base height {:.4} mm is below the minimum deposit {:.4} mm",
                part.base_height, bounds.dh_min
            )));
        }
        (n_base, dh_base)
    } else {
        (0, 0.0)
    };
    Ok(PlanShape {
        n_base_layers: n_base,
        n_tilted_layers: n_tilted,
        theta_eff,
        dh_base,
    })
}

/// Builds the full nominal plan: uniform base layers up to `base_height`,
/// then tilted layers accumulating to `final_angle` (see [`plan_shape`]
/// for the layer arithmetic).
pub fn generate_layer_plans(
    part: &PartSpec,
    geom: &SliceGeometry,
    bounds: &ProcessBounds,
) -> Result<Vec<LayerPlan>> {
    let n = geom.r_of_segment.len();
    if n < 2 {
        return Err(Error::Config("geometry has fewer than 2 segments".into()));
    }
    let shape = plan_shape(part, geom, bounds)?;
    let PlanShape {
        n_base_layers: n_base,
        n_tilted_layers: n_tilted,
        theta_eff,
        dh_base,
    } = shape;

    let mut plans = Vec::with_capacity(n_base + n_tilted);
    let mut h_prev = vec![0.0; n];
    let mut push_layer = |dh: Vec<f64>, plans: &mut Vec<LayerPlan>| -> Result<()> {
        for (k, &d) in dh.iter().enumerate() {
            if d < bounds.dh_min - 1e-12 || d > bounds.dh_max + 1e-12 {
                return Err(Error::GeometryInfeasible(format!(
                    "planned deposit {:.6} mm at segment {k} leaves the envelope \
                     [{:.6}, {:.6}]",
                    d, bounds.dh_min, bounds.dh_max
                )));
            }
        }
        let h_d: Vec<f64> = h_prev.iter().zip(&dh).map(|(h, d)| h + d).collect();
        plans.push(LayerPlan {
            layer_index: plans.len() + 1,
            segment_positions: geom.r_of_segment.clone(),
            h_d: h_d.clone(),
            dh_nom: dh,
        });
        h_prev = h_d;
        Ok(())
    };

    for _ in 0..n_base {
        push_layer(vec![dh_base; n], &mut plans)?;
    }
    for _ in 0..n_tilted {
        let dh: Vec<f64> = geom.r_of_segment.iter().map(|r| r * theta_eff).collect();
        push_layer(dh, &mut plans)?;
    }
    Ok(plans)
}

/// Open-loop velocity plan: per-segment model inversion of the nominal
/// deposition.
///
/// Speeds outside the process box mean the plan and the envelope disagree;
/// that is an error, not something to clamp away silently.
pub fn nominal_velocity_plan(
    plans: &[LayerPlan],
    model: &ModelCoefficients,
    bounds: &ProcessBounds,
) -> Result<Vec<VelocityProfile>> {
    let slack = 1e-9 * (bounds.v_t_max - bounds.v_t_min);
    plans
        .iter()
        .map(|plan| {
            let v_t: Vec<f64> = plan
                .dh_nom
                .iter()
                .enumerate()
                .map(|(k, &dh)| {
                    let v = model.invert(dh)?;
                    if v < bounds.v_t_min - slack || v > bounds.v_t_max + slack {
                        return Err(Error::PlanInfeasible(format!(
                            "layer {} segment {k}: deposit {:.4} mm needs {:.4} mm/s, \
                             outside [{}, {}]",
                            plan.layer_index, dh, v, bounds.v_t_min, bounds.v_t_max
                        )));
                    }
                    Ok(bounds.clamp_speed(v))
                })
                .collect::<Result<_>>()?;
            Ok(VelocityProfile {
                layer_index: plan.layer_index,
                v_t,
            })
        })
        .collect()
}

/// Plan document written by the `plan` command.
#[derive(Debug, Serialize, Deserialize)]
pub struct PlanDocument {
    pub theta_step: f64,
    pub n_base_layers: usize,
    pub n_tilted_layers: usize,
    pub n_segments: usize,
    pub layers: Vec<LayerPlan>,
}

impl PlanDocument {
    pub fn new(shape: &PlanShape, plans: &[LayerPlan]) -> Self {
        PlanDocument {
            theta_step: shape.theta_eff,
            n_base_layers: shape.n_base_layers,
            n_tilted_layers: shape.n_tilted_layers,
            n_segments: plans.first().map_or(0, |p| p.dh_nom.len()),
            layers: plans.to_vec(),
        }
    }
}

pub fn write_plan_document(doc: &PlanDocument, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(doc)
        .map_err(|e| Error::Config(format!("cannot serialize plan: {e}")))?;
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(text.as_bytes())
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn cold() -> ModelCoefficients {
        ModelCoefficients::new(-0.4619, 1.647, "cold")
    }

    fn demo_part() -> PartSpec {
        PartSpec {
            tube_diameter: 50.0,
            bend_radius: 224.0,
            final_angle: FRAC_PI_4,
            base_height: 5.0,
        }
    }

    fn assert_close(actual: f64, expected: f64, tol: f64) {
        assert!(
            (actual - expected).abs() <= tol,
            "expected {expected}, got {actual}"
        );
    }

    #[test]
    fn geometry_spans_radial_extent_evenly() {
        let geom = compute_slice_geometry(&demo_part(), 11).unwrap();
        assert_eq!(geom.r_of_segment.len(), 11);
        assert_close(geom.r_of_segment[0], 199.0, 1e-12);
        assert_close(geom.r_of_segment[10], 249.0, 1e-12);
        assert_close(geom.l, 50.0, 0.0);
        for w in geom.r_of_segment.windows(2) {
            assert_close(w[1] - w[0], 5.0, 1e-12);
        }
    }

    #[test]
    fn geometry_two_segments_are_the_endpoints() {
        let geom = compute_slice_geometry(&demo_part(), 2).unwrap();
        assert_eq!(geom.r_of_segment, vec![199.0, 249.0]);
    }

    #[test]
    fn geometry_rejects_degenerate_parts() {
        let mut p = demo_part();
        p.tube_diameter = 0.0;
        assert!(compute_slice_geometry(&p, 2).is_err());

        let p = demo_part();
        assert!(compute_slice_geometry(&p, 1).is_err());

        let mut p = demo_part();
        p.bend_radius = 10.0; // rotation center inside the cross-section
        assert!(p.validate().is_err());

        let mut p = demo_part();
        p.final_angle = FRAC_PI_2 * 2.5;
        assert!(p.validate().is_err());
    }

    #[test]
    fn max_angle_increment_formula() {
        let geom = compute_slice_geometry(&demo_part(), 11).unwrap();
        let bounds = ProcessBounds::with_heights(3.0, 17.0, 1.4, 3.0).unwrap();
        let theta = max_angle_increment(&geom, &bounds).unwrap();
        // Frozen from 3 / 249; inner deposit 199 * theta = 2.3976 >= 1.4.
        assert_close(theta, 0.012048192771084338, 1e-15);
        assert!(199.0 * theta >= bounds.dh_min);
    }

    #[test]
    fn max_angle_increment_uniform_radius() {
        let geom = SliceGeometry {
            p_rot: 0.0,
            l: 50.0,
            theta_step: 0.0,
            r_of_segment: vec![200.0; 5],
        };
        let bounds = ProcessBounds::with_heights(3.0, 17.0, 1.4, 3.0).unwrap();
        let theta = max_angle_increment(&geom, &bounds).unwrap();
        assert_close(theta, 3.0 / 200.0, 1e-15);
    }

    #[test]
    fn max_angle_increment_infeasible_ratio() {
        let geom = compute_slice_geometry(&demo_part(), 11).unwrap();
        // dh_min/dh_max = 0.9 > r_min/r_max = 0.799: nothing works.
        let bounds = ProcessBounds::with_heights(3.0, 17.0, 2.7, 3.0).unwrap();
        let err = max_angle_increment(&geom, &bounds).unwrap_err();
        assert!(matches!(err, Error::GeometryInfeasible(_)));

        // Independent check: scan a theta grid and confirm no candidate
        // satisfies both height bounds anywhere on the part.
        let r_min = 199.0;
        let r_max = 249.0;
        let feasible_exists = (1..=100_000).any(|i| {
            let theta = 3.0e-2 * i as f64 / 100_000.0;
            r_max * theta <= 3.0 + 1e-15 && r_min * theta >= 2.7 - 1e-15
        });
        assert!(!feasible_exists);
    }

    #[test]
    fn plan_single_layer_when_angle_equals_theta() {
        let mut part = demo_part();
        part.base_height = 0.0;
        let geom = compute_slice_geometry(&part, 11).unwrap();
        let bounds = ProcessBounds::with_heights(3.0, 17.0, 1.4, 3.0).unwrap();
        let theta = max_angle_increment(&geom, &bounds).unwrap();
        part.final_angle = theta;
        let plans = generate_layer_plans(&part, &geom, &bounds).unwrap();
        assert_eq!(plans.len(), 1);
        assert_close(plans[0].dh_nom[10], 3.0, 1e-12);
    }

    #[test]
    fn plan_45_degree_bend_has_66_tilted_layers() {
        // ceil((pi/4) / (3/249)) = 66 when dh_max = 3 mm exactly.
        let mut part = demo_part();
        part.base_height = 0.0;
        let geom = compute_slice_geometry(&part, 11).unwrap();
        let bounds = ProcessBounds::with_heights(3.0, 17.0, 1.4, 3.0).unwrap();
        let plans = generate_layer_plans(&part, &geom, &bounds).unwrap();
        assert_eq!(plans.len(), 66);
        // Even split: every tilted layer deposits final_angle/66 per radian.
        let theta_eff = FRAC_PI_4 / 66.0;
        assert_close(plans[7].dh_nom[0], 199.0 * theta_eff, 1e-12);
    }

    #[test]
    fn plan_telescoping_sum_is_exact() {
        let part = demo_part();
        let geom = compute_slice_geometry(&part, 11).unwrap();
        let bounds = ProcessBounds::from_model(&cold(), 3.0, 17.0).unwrap();
        let plans = generate_layer_plans(&part, &geom, &bounds).unwrap();
        let n = geom.r_of_segment.len();
        for k in 0..n {
            let summed: f64 = plans.iter().map(|p| p.dh_nom[k]).sum();
            let last = plans.last().unwrap().h_d[k];
            assert_close(summed, last, 1e-9);
        }
        // Per-layer telescoping h_d(i) = h_d(i-1) + dh_nom(i).
        for w in plans.windows(2) {
            for k in 0..n {
                assert_close(w[1].h_d[k], w[0].h_d[k] + w[1].dh_nom[k], 1e-12);
            }
        }
    }

    #[test]
    fn plan_respects_height_envelope_and_final_angle() {
        let part = demo_part();
        let geom = compute_slice_geometry(&part, 50).unwrap();
        let bounds = ProcessBounds::from_model(&cold(), 3.0, 17.0).unwrap();
        let plans = generate_layer_plans(&part, &geom, &bounds).unwrap();
        for p in &plans {
            for &d in &p.dh_nom {
                assert!(d >= bounds.dh_min - 1e-12 && d <= bounds.dh_max + 1e-12);
            }
        }
        // Accumulated tilt reaches the final angle exactly.
        let theta_eff = plan_shape(&part, &geom, &bounds).unwrap().theta_eff;
        let n_tilted = plans
            .iter()
            .filter(|p| (p.dh_nom[0] - p.dh_nom[49]).abs() > 1e-12)
            .count();
        assert_close(n_tilted as f64 * theta_eff, part.final_angle, 1e-10);
        let theta_cap = max_angle_increment(&geom, &bounds).unwrap();
        assert!(n_tilted as f64 * theta_cap >= part.final_angle);
        assert!((n_tilted as f64 - 1.0) * theta_cap < part.final_angle);
    }

    #[test]
    fn plan_theta_override_adds_layers() {
        let mut part = demo_part();
        part.base_height = 0.0;
        let bounds = ProcessBounds::from_model(&cold(), 3.0, 17.0).unwrap();
        let mut geom = compute_slice_geometry(&part, 11).unwrap();
        let baseline = generate_layer_plans(&part, &geom, &bounds).unwrap().len();
        let theta_cap = max_angle_increment(&geom, &bounds).unwrap();
        geom.theta_step = theta_cap * 0.7;
        let more = generate_layer_plans(&part, &geom, &bounds).unwrap().len();
        assert_eq!(
            more,
            (part.final_angle / geom.theta_step - 1e-12).ceil() as usize
        );
        assert!(more > baseline);

        geom.theta_step = theta_cap * 1.5;
        assert!(matches!(
            generate_layer_plans(&part, &geom, &bounds),
            Err(Error::GeometryInfeasible(_))
        ));
    }

    #[test]
    fn plan_is_bit_deterministic() {
        let part = demo_part();
        let geom = compute_slice_geometry(&part, 50).unwrap();
        let bounds = ProcessBounds::from_model(&cold(), 3.0, 17.0).unwrap();
        let a = generate_layer_plans(&part, &geom, &bounds).unwrap();
        let b = generate_layer_plans(&part, &geom, &bounds).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            for (p, q) in x.h_d.iter().zip(&y.h_d) {
                assert_eq!(p.to_bits(), q.to_bits());
            }
            for (p, q) in x.dh_nom.iter().zip(&y.dh_nom) {
                assert_eq!(p.to_bits(), q.to_bits());
            }
        }
    }

    #[test]
    fn velocity_plan_uniform_layer_gives_uniform_speed() {
        let m = cold();
        let bounds = ProcessBounds::from_model(&m, 3.0, 17.0).unwrap();
        let v_star = 7.0;
        let dh = m.predict(v_star).unwrap();
        let plan = LayerPlan {
            layer_index: 1,
            segment_positions: vec![0.0; 4],
            h_d: vec![dh; 4],
            dh_nom: vec![dh; 4],
        };
        let profiles = nominal_velocity_plan(&[plan], &m, &bounds).unwrap();
        for &v in &profiles[0].v_t {
            assert_close(v, v_star, 1e-10);
        }
    }

    #[test]
    fn velocity_plan_matches_per_segment_formula() {
        let m = cold();
        let part = demo_part();
        let geom = compute_slice_geometry(&part, 11).unwrap();
        let bounds = ProcessBounds::from_model(&m, 3.0, 17.0).unwrap();
        let plans = generate_layer_plans(&part, &geom, &bounds).unwrap();
        let profiles = nominal_velocity_plan(&plans, &m, &bounds).unwrap();
        let tilted = plans.len() - 1; // last layer is tilted
        let theta_eff = plan_shape(&part, &geom, &bounds).unwrap().theta_eff;
        for (k, &r) in geom.r_of_segment.iter().enumerate() {
            let expect = ((r * theta_eff).ln() - 1.647) / -0.4619;
            assert_close(profiles[tilted].v_t[k], expect.exp(), 1e-9);
        }
        // Taller deposits at larger radius need slower torch speeds.
        for w in profiles[tilted].v_t.windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn velocity_plan_rejects_out_of_range_deposits() {
        let m = cold();
        let bounds = ProcessBounds::from_model(&m, 3.0, 17.0).unwrap();
        let plan = LayerPlan {
            layer_index: 1,
            segment_positions: vec![0.0],
            h_d: vec![0.5],
            dh_nom: vec![0.5], // needs ~57 mm/s, far beyond v_t_max
        };
        assert!(matches!(
            nominal_velocity_plan(&[plan], &m, &bounds),
            Err(Error::PlanInfeasible(_))
        ));
    }

    #[test]
    fn speed_bound_closure_for_derived_theta() {
        // Whenever the plan uses the feasible-theta cap, the open-loop
        // speeds stay inside the box.
        let m = cold();
        let part = demo_part();
        let geom = compute_slice_geometry(&part, 50).unwrap();
        let bounds = ProcessBounds::from_model(&m, 3.0, 17.0).unwrap();
        let plans = generate_layer_plans(&part, &geom, &bounds).unwrap();
        let profiles = nominal_velocity_plan(&plans, &m, &bounds).unwrap();
        for p in &profiles {
            for &v in &p.v_t {
                assert!(v >= bounds.v_t_min && v <= bounds.v_t_max);
            }
        }
    }
}
