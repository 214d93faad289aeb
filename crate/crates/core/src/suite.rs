//! Named registry of identity checks.
//!
//! Each entry bundles a configured instance of one verifier into a stable
//! id the runner and the report files refer to. Entries may emit several
//! reports; their ids extend the entry id with a suffix. The default
//! selection covers every identity with an exactly constructed carrier.
//! Entries that are off by default either estimate their own clock (the
//! fractional-dimension radial models, whose calibration allowance would
//! dilute the suite) or exist to fail (the mutation check).

use crate::error::EngineError;
use crate::functional::{CylinderFunctional, IntegrableTestFunction, Scope, StoppingRule};
use crate::pricing::{price_report, PutSpec};
use crate::verify::{
    azema_slope, verify_azema, verify_class_d, verify_doob, verify_master, verify_master_mutated,
    verify_martingale_constancy, verify_nf_density, verify_stopping, w_decomposition,
    verify_ainf_image_class_d, verify_ainf_image_recurrent, IdentityReport, SigmaModel,
    VerifyConfig,
};

type EntryFn = fn(&VerifyConfig) -> Result<Vec<IdentityReport>, EngineError>;

pub struct SuiteEntry {
    pub id: &'static str,
    /// Included when no explicit selection is given.
    pub default_on: bool,
    run: EntryFn,
}

fn one() -> CylinderFunctional {
    CylinderFunctional::one()
}

fn zeros_one() -> CylinderFunctional {
    CylinderFunctional::new(vec![], 1.0, Scope::ZerosFiltration, |_| 1.0).expect("static functional")
}

fn hit_or_horizon() -> StoppingRule {
    StoppingRule::MinOf(
        Box::new(StoppingRule::HittingLevel { level: 1.0, cap: 1.0 }),
        Box::new(StoppingRule::Deterministic { time: 1.0 }),
    )
}

fn constancy_rules() -> Vec<(&'static str, StoppingRule)> {
    vec![
        ("qt", StoppingRule::Deterministic { time: 0.25 }),
        ("one", StoppingRule::Deterministic { time: 1.0 }),
        ("hit", hit_or_horizon()),
    ]
}

fn single(r: Result<IdentityReport, EngineError>) -> Result<Vec<IdentityReport>, EngineError> {
    r.map(|x| vec![x])
}

/// Radial-model band width: a few root-steps so zero visits are resolved.
fn radial_band(step: f64) -> f64 {
    3.0 * step.sqrt()
}

pub fn registry() -> Vec<SuiteEntry> {
    vec![
        SuiteEntry {
            id: "master_absbm_const",
            default_on: true,
            run: |cfg| single(verify_master("master_absbm_const", SigmaModel::AbsBm, &one(), cfg.horizon, cfg)),
        },
        SuiteEntry {
            id: "master_absbm_window",
            default_on: true,
            run: |cfg| {
                let f = CylinderFunctional::value_window(cfg.horizon / 2.0, 0.5);
                single(verify_master("master_absbm_window", SigmaModel::AbsBm, &f, cfg.horizon, cfg))
            },
        },
        SuiteEntry {
            id: "master_drawdown",
            default_on: true,
            run: |cfg| single(verify_master("master_drawdown", SigmaModel::Drawdown, &one(), cfg.horizon, cfg)),
        },
        SuiteEntry {
            id: "master_bessel_d1",
            default_on: false,
            run: |cfg| {
                let model = SigmaModel::Bessel { delta: 1.0, eps: radial_band(cfg.step) };
                single(verify_master("master_bessel_d1", model, &one(), cfg.horizon, cfg))
            },
        },
        SuiteEntry {
            id: "master_bessel_d15",
            default_on: false,
            run: |cfg| {
                let model = SigmaModel::Bessel { delta: 1.5, eps: radial_band(cfg.step) };
                single(verify_master("master_bessel_d15", model, &one(), cfg.horizon, cfg))
            },
        },
        SuiteEntry {
            id: "stopping_absbm_hit",
            default_on: true,
            run: |cfg| {
                single(verify_stopping("stopping_absbm_hit", SigmaModel::AbsBm, &one(), &hit_or_horizon(), cfg))
            },
        },
        SuiteEntry {
            id: "class_d_projection",
            default_on: true,
            run: |cfg| {
                let rule = StoppingRule::Deterministic { time: cfg.horizon / 2.0 };
                single(verify_class_d("class_d_projection", &one(), &rule, cfg))
            },
        },
        SuiteEntry {
            id: "doob_plus_mass",
            default_on: true,
            run: |cfg| single(verify_master("doob_plus_mass", SigmaModel::WPlus, &one(), cfg.horizon, cfg)),
        },
        SuiteEntry {
            id: "doob_minus_mass",
            default_on: true,
            run: |cfg| single(verify_master("doob_minus_mass", SigmaModel::WMinus, &one(), cfg.horizon, cfg)),
        },
        SuiteEntry {
            id: "doob_signed_difference",
            default_on: true,
            run: |cfg| {
                let rule = StoppingRule::Deterministic { time: cfg.horizon };
                single(verify_doob("doob_signed_difference", &one(), &rule, cfg))
            },
        },
        SuiteEntry {
            id: "nf_density_exp",
            default_on: true,
            run: |cfg| {
                let f = IntegrableTestFunction::Exponential { rate: 1.0 };
                single(verify_nf_density("nf_density_exp", SigmaModel::AbsBm, &f, &one(), cfg.horizon, cfg))
            },
        },
        SuiteEntry {
            id: "ainf_image_absbm",
            default_on: true,
            run: |cfg| {
                let f = IntegrableTestFunction::IndicatorInterval { upper: 1.0 };
                single(verify_ainf_image_recurrent("ainf_image_absbm", SigmaModel::AbsBm, &f, cfg))
            },
        },
        SuiteEntry {
            id: "ainf_image_class_d",
            default_on: true,
            run: |cfg| {
                let f = IntegrableTestFunction::IndicatorInterval { upper: 1.0 };
                single(verify_ainf_image_class_d("ainf_image_class_d", &f, cfg))
            },
        },
        SuiteEntry {
            id: "mf_constancy_absbm",
            default_on: true,
            run: |cfg| {
                let f = IntegrableTestFunction::Exponential { rate: 1.0 };
                verify_martingale_constancy("mf_constancy_absbm", SigmaModel::AbsBm, &f, &constancy_rules(), cfg)
            },
        },
        SuiteEntry {
            id: "mf_constancy_drawdown",
            default_on: true,
            run: |cfg| {
                let f = IntegrableTestFunction::Exponential { rate: 1.0 };
                verify_martingale_constancy("mf_constancy_drawdown", SigmaModel::Drawdown, &f, &constancy_rules(), cfg)
            },
        },
        SuiteEntry {
            id: "azema_identity_const",
            default_on: true,
            run: |cfg| single(verify_azema("azema_identity_const", 0.5, &zeros_one(), cfg.horizon, cfg)),
        },
        SuiteEntry {
            id: "azema_identity_window",
            default_on: true,
            run: |cfg| {
                let f = CylinderFunctional::last_zero_window(cfg.horizon / 2.0);
                single(verify_azema("azema_identity_window", 0.5, &f, cfg.horizon, cfg))
            },
        },
        SuiteEntry {
            id: "azema_slope",
            default_on: true,
            run: |cfg| single(azema_slope("azema_slope", cfg)),
        },
        SuiteEntry {
            id: "w_decomposition",
            default_on: true,
            run: |cfg| single(w_decomposition("w_decomposition", cfg.horizon, cfg)),
        },
        SuiteEntry {
            id: "pricing",
            default_on: true,
            run: |cfg| {
                // both pricing estimators are exact in law at any grid
                // scale, so a coarse grid loses nothing over a long horizon
                let pricing_cfg = VerifyConfig { step: cfg.step.max(2f64.powi(-6)), ..*cfg };
                let spec = PutSpec::new(1.0, 1.0, 1.0, 8.0)?;
                price_report("pricing", &spec, &pricing_cfg)
            },
        },
        SuiteEntry {
            id: "mutation_drop_window",
            default_on: false,
            run: |cfg| {
                single(verify_master_mutated("mutation_drop_window", SigmaModel::AbsBm, &one(), cfg.horizon, cfg))
            },
        },
    ]
}

pub fn default_ids() -> Vec<&'static str> {
    registry().iter().filter(|e| e.default_on).map(|e| e.id).collect()
}

pub fn all_ids() -> Vec<&'static str> {
    registry().iter().map(|e| e.id).collect()
}

/// Runs one registry entry by id.
pub fn run_identity(id: &str, cfg: &VerifyConfig) -> Result<Vec<IdentityReport>, EngineError> {
    let reg = registry();
    let entry = reg
        .iter()
        .find(|e| e.id == id)
        .ok_or_else(|| EngineError::config(format!("unknown identity '{id}'")))?;
    (entry.run)(cfg)
}

/// Runs a selection of entries, or the default set when none is given.
/// Unknown ids fail before anything runs.
pub fn run_suite(
    cfg: &VerifyConfig,
    selection: Option<&[String]>,
) -> Result<Vec<IdentityReport>, EngineError> {
    cfg.validate()?;
    let reg = registry();
    let chosen: Vec<&SuiteEntry> = match selection {
        Some(ids) => {
            let mut picked = Vec::with_capacity(ids.len());
            for id in ids {
                let entry = reg
                    .iter()
                    .find(|e| e.id == id.as_str())
                    .ok_or_else(|| EngineError::config(format!("unknown identity '{id}'")))?;
                picked.push(entry);
            }
            picked
        }
        None => reg.iter().filter(|e| e.default_on).collect(),
    };
    let mut out = Vec::new();
    for entry in chosen {
        out.extend((entry.run)(cfg)?);
    }
    Ok(out)
}
