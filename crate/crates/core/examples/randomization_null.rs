//! The same model answered by an abductive respondent (latents inferred from
//! the treatment context) and by a randomized one (treatment independent of
//! everything). Only the first shows drift; the second sits at the sampling
//! floor given by the split-half null TVD.
//!
//!     cargo run --release --example randomization_null

use std::sync::Arc;

use userdrift::adjust::{AdjustConfig, Experiment, RunState};
use userdrift::estimate::BootstrapConfig;
use userdrift::harness::scm_personas;
use userdrift::respondent::{scm_question_bank, Scenario, ScmRespondent};
use userdrift::scm::{RespondentMode, Scm};

fn main() -> userdrift::Result<()> {
    let scm = Arc::new(Scm::drift3());
    let (bank, map) = scm_question_bank(&scm, 1)?;
    let scenario = Scenario::opinionqa_immigration();
    let config = AdjustConfig::new(30, 0.0);

    for mode in [RespondentMode::Abductive, RespondentMode::Randomized] {
        let respondent = ScmRespondent::new(scm.clone(), mode, &bank, &map)?;
        let exp = Experiment {
            respondent: &respondent,
            scenario: &scenario,
            bank: &bank,
            config: &config,
            bootstrap: BootstrapConfig::default(),
            seed: 5,
            persona_schemas: &[],
            oracle: Some(&respondent),
        };
        let mut state = RunState::new("null", scm_personas(&scm, 100, 5)?)?;
        let r = exp.step(&mut state, &mut Vec::new())?;
        let exact = r.exact.expect("oracle attached");
        let null = r.null_tvd.unwrap_or(f64::NAN);
        println!("{mode:?}");
        println!("  mean TVD {:.4}  null {:.4}  ratio {:.2}  exact {:.4}", r.mean_tvd, null, r.mean_tvd / null, exact.mean_tvd);
        println!(
            "  effect {:.3} [{:.3}, {:.3}]  tau_obs {:.3}  tau_ate_mix {:.3}",
            r.observed_effect, r.effect_ci.lo, r.effect_ci.hi, exact.tau_obs, exact.tau_ate_mix
        );
    }
    Ok(())
}
