//! Persona sampling from a CSV table, prompt rendering, confounder
//! augmentation, and how raw replies are mapped onto answer options.
//!
//!     cargo run --example answer_mapping_and_personas

use std::path::Path;

use userdrift::population::{
    augment_persona, load_personas, map_answer, render_persona_prompt, AttributeSchema, AugmentedPersona, QaPair,
};
use userdrift::respondent::Scenario;

fn main() -> userdrift::Result<()> {
    let schemas = [
        AttributeSchema::free_text("age"),
        AttributeSchema::categorical("sex", ["Male", "Female"])?,
    ];
    let csv = Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/personas/personas_sample.csv");
    let sample = load_personas(&csv, &schemas, 3, 42)?;
    for p in &sample.personas {
        println!("{} {:?}", p.id, p.attributes);
    }

    let scenario = Scenario::opinionqa_immigration();
    let base = AugmentedPersona::new(sample.personas[0].clone());
    println!("\n--- base prompt ---\n{}", render_persona_prompt(&base, &scenario));

    // Iteration 0 elicited a political ideology; it is fixed from now on.
    let augmented = augment_persona(
        &base,
        0,
        vec![QaPair {
            question: "What is your political ideology?".into(),
            answer: "Moderate".into(),
        }],
    )?;
    println!("--- augmented prompt ---\n{}", render_persona_prompt(&augmented, &scenario));

    let priority = AttributeSchema::categorical("priority", ["High priority", "Low priority"])?;
    let likert = AttributeSchema::categorical("likely", ["Very likely", "Likely", "Unlikely", "Very unlikely"])?;
    for (raw, schema) in [
        ("high priority", &priority),
        ("**Low priority.**", &priority),
        ("I think it is a High priority for me", &priority),
        ("Hard to say", &priority),
        ("Very likely!", &likert),
        ("Likely", &likert),
        ("2", &likert),
    ] {
        println!("{raw:>40} -> {}", map_answer(raw, schema));
    }
    Ok(())
}
