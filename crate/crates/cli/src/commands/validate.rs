use super::Resolver;
use crate::error::CliError;
use crate::output::Output;
use crate::validate::{Suite, CRITERIA};
use serde_json::json;
use std::path::PathBuf;

pub fn validate(r: &Resolver, mut out: Output) -> Result<Vec<PathBuf>, CliError> {
    let ids: Vec<u8> = match &r.0.only {
        None => CRITERIA.iter().map(|(id, _)| *id).collect(),
        Some(v) => v
            .resolve()?
            .into_iter()
            .map(|x| {
                CRITERIA
                    .iter()
                    .find(|(id, _)| f64::from(*id) == x)
                    .map(|(id, _)| *id)
                    .ok_or_else(|| CliError::Config(format!("no criterion {x}")))
            })
            .collect::<Result<_, _>>()?,
    };
    let results = Suite::new().run(&ids, |c| println!("{}", c.line()));
    out.write_json("validation.json", &results)?;
    let failed: Vec<u8> = results.iter().filter(|c| !c.pass).map(|c| c.id).collect();
    // Timings vary between runs, so they stay out of the hashed parameters.
    let files = out.finish("validate", &json!({ "only": ids }), None)?;
    if failed.is_empty() {
        Ok(files)
    } else {
        Err(CliError::Validation(format!("criteria {failed:?} failed")))
    }
}
