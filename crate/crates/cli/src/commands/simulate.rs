use std::fs;
use std::time::{SystemTime, UNIX_EPOCH};

use cpdmd::experiment::derive_seed;
use cpdmd::synth::{self, ChangeKind, SignalParams};
use cpdmd::Series;
use serde::{Deserialize, Serialize};

use crate::args::SimulateArgs;
use crate::error::{CliError, CliResult};
use crate::io;

/// Ground truth for a batch of streams, read back by `evaluate`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default)]
    pub scenario: Option<String>,
    #[serde(default)]
    pub kind: Option<ChangeKind>,
    #[serde(default)]
    pub null: bool,
    #[serde(default)]
    pub tau: Option<usize>,
    #[serde(default)]
    pub pre: Option<SignalParams>,
    #[serde(default)]
    pub post: Option<SignalParams>,
    #[serde(default)]
    pub base_seed: Option<u64>,
    pub sequences: Vec<SequenceEntry>,
    /// Not part of any comparison.
    #[serde(default)]
    pub created_unix: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequenceEntry {
    pub id: String,
    #[serde(default)]
    pub file: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    pub length: usize,
    pub changepoints: Vec<usize>,
}

/// File-system friendly form of a scenario name.
pub fn slug(name: &str) -> String {
    name.replace('π', "pi")
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

pub fn run(args: &SimulateArgs) -> CliResult<()> {
    let mut scenario = synth::lookup(&args.scenario)?;
    if args.null {
        scenario = synth::null_scenario(scenario.kind, scenario.length);
    }
    if let Some(len) = args.length {
        scenario = scenario.with_length(len);
    }
    scenario.validate()?;
    if args.seeds == 0 {
        return Err(CliError::usage("--seeds must be at least 1"));
    }
    fs::create_dir_all(&args.output).map_err(|e| CliError::data(format!("{}: {e}", args.output.display())))?;

    let stem = slug(&scenario.name);
    let mut sequences = Vec::new();
    for k in 0..args.seeds {
        let seed = derive_seed(args.seed, &scenario.name, k);
        let id = format!("{stem}_{k:03}");
        let file = format!("{id}.csv");
        let series = Series::from_univariate(synth::generate(&scenario, seed));
        io::write_series(&args.output.join(&file), &["x".to_string()], &series)?;
        sequences.push(SequenceEntry {
            id,
            file: Some(file),
            seed: Some(seed),
            length: scenario.length,
            changepoints: scenario.tau.into_iter().collect(),
        });
    }
    let manifest = Manifest {
        scenario: Some(scenario.name.clone()),
        kind: Some(scenario.kind),
        null: scenario.tau.is_none(),
        tau: scenario.tau,
        pre: Some(scenario.pre.clone()),
        post: Some(scenario.post.clone()),
        base_seed: Some(args.seed),
        sequences,
        created_unix: SystemTime::now().duration_since(UNIX_EPOCH).ok().map(|d| d.as_secs()),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    io::emit(Some(&args.output.join("manifest.json")), &(text + "\n"))?;
    eprintln!("wrote {} stream(s) for {} to {}", args.seeds, scenario.name, args.output.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs() {
        assert_eq!(slug("periodicity/5π/75"), "periodicity_5pi_75");
        assert_eq!(slug("double/(9π/75,4π/75)"), "double__9pi_75_4pi_75_");
        assert_eq!(slug("mean/-2"), "mean_-2");
    }
}
