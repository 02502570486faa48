//! One iteration of simulated trials on the toy model, then the drift
//! diagnostic: per-persona negative-control TVD, its sampling floor, and the
//! observed effect with a persona-level bootstrap interval.
//!
//!     cargo run --example negative_control_diagnostic

use std::sync::Arc;

use userdrift::adjust::{AdjustConfig, Experiment, RunState};
use userdrift::estimate::BootstrapConfig;
use userdrift::harness::scm_personas;
use userdrift::respondent::{scm_question_bank, Scenario, ScmRespondent};
use userdrift::scm::{RespondentMode, Scm};

fn main() -> userdrift::Result<()> {
    let scm = Arc::new(Scm::toy_drift_v1());
    let (bank, map) = scm_question_bank(&scm, 1)?;
    let respondent = ScmRespondent::new(scm.clone(), RespondentMode::Abductive, &bank, &map)?;
    let scenario = Scenario::opinionqa_immigration();
    let config = AdjustConfig::new(30, 0.05);
    let exp = Experiment {
        respondent: &respondent,
        scenario: &scenario,
        bank: &bank,
        config: &config,
        bootstrap: BootstrapConfig::default(),
        seed: 1,
        persona_schemas: &[],
        oracle: Some(&respondent),
    };

    let state = RunState::new("diagnostic", scm_personas(&scm, 50, 1)?)?;
    let sim = exp.simulate_iteration(&state);
    let report = exp.report(&state, &sim.records, 0)?;

    println!("{} records, {} personas", sim.records.len(), report.personas.len());
    for p in report.personas.iter().take(5) {
        println!("  {}  TVD {:.3}", p.persona, p.tvd);
    }
    println!(
        "mean TVD {:.3} [{:.3}, {:.3}]   null floor {:.3}",
        report.mean_tvd,
        report.mean_tvd_ci.lo,
        report.mean_tvd_ci.hi,
        report.null_tvd.unwrap_or(f64::NAN)
    );
    println!(
        "observed effect {:.3} [{:.3}, {:.3}]",
        report.observed_effect, report.effect_ci.lo, report.effect_ci.hi
    );
    if let Some(x) = report.exact {
        println!("exact: TVD {:.3}, tau_obs {:.3}, tau_ate_mix {:.3}", x.mean_tvd, x.tau_obs, x.tau_ate_mix);
    }
    for d in &report.distributions {
        println!("{} over {:?}", d.question, d.support);
        println!("  arm 0 {:.3?}", d.probs[0]);
        println!("  arm 1 {:.3?}", d.probs[1]);
    }
    Ok(())
}
