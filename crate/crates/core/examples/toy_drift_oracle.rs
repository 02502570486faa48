//! Exact quantities of the two-state toy model: latent posteriors per arm,
//! the decomposition of the observed effect, and how fixing the elicited
//! confounder shrinks the negative-control gap.
//!
//!     cargo run --example toy_drift_oracle

use userdrift::scm::{Assignment, RespondentMode, Scm};
use userdrift::Arm;

fn main() -> userdrift::Result<()> {
    let scm = Scm::toy_drift_v1();
    let l: Assignment = [("sex".to_string(), "female".to_string())].into();
    let none = Assignment::new();
    let mode = RespondentMode::Abductive;

    let prior = scm.latent_posterior(&l, None, &none, mode)?;
    println!("latent states {:?}", scm.latent_states());
    println!("prior          {:?}", prior.probs());
    for arm in Arm::BOTH {
        let post = scm.latent_posterior(&l, Some(arm), &none, mode)?;
        println!("posterior {arm:?} {:?}", post.probs());
    }

    let e = scm.exact_estimands(&l, &none, mode)?;
    println!("\ntau_obs {:.4} = sb {:.4} + tau_ate_mix {:.4}", e.tau_obs, e.sb, e.tau_ate_mix);
    println!("att {:.4}  atc {:.4}  tau_ate_prior {:.4}", e.att, e.atc, e.tau_ate_prior);

    let before = scm.exact_tvd(&l, &["Z"], &none, mode)?;
    println!("\nTVD on Z: {before:.4}");
    for v in ["fit", "unfit"] {
        let fixed: Assignment = [("fitness".to_string(), v.to_string())].into();
        let after = scm.exact_tvd(&l, &["Z"], &fixed, mode)?;
        let tau = scm.exact_estimands(&l, &fixed, mode)?;
        println!("  fitness={v:<5} TVD {after:.4}  tau_obs {:.4}  sb {:.4}", tau.tau_obs, tau.sb);
    }

    // A randomized world has no drift at all.
    let r = RespondentMode::Randomized;
    println!(
        "\nrandomized: TVD {:.4}, tau_obs {:.4}",
        scm.exact_tvd(&l, &["Z"], &none, r)?,
        scm.exact_estimands(&l, &none, r)?.tau_obs
    );
    Ok(())
}
