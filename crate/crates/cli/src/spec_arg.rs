use std::path::Path;

use manred::ManifoldSpec;

use crate::commands::CliError;

/// Accepts a JSON file, inline JSON, or a `kind:args` shorthand.
pub fn parse_spec(text: &str) -> Result<ManifoldSpec, CliError> {
    let text = text.trim();
    if text.starts_with('{') {
        return Ok(serde_json::from_str(text).map_err(manred::Error::from)?);
    }
    if Path::new(text).is_file() {
        let body = std::fs::read_to_string(text).map_err(manred::Error::from)?;
        return Ok(serde_json::from_str(&body).map_err(manred::Error::from)?);
    }
    let usage = || CliError::Usage(format!("cannot parse manifold spec '{text}'"));
    let (kind, args) = text.split_once(':').ok_or_else(usage)?;
    let nums = args
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| usage())?;
    let spec = match (kind.trim().to_ascii_lowercase().as_str(), nums.as_slice()) {
        ("euclidean", &[dim]) => ManifoldSpec::Euclidean { dim },
        ("sphere", &[dim]) => ManifoldSpec::Sphere { dim },
        ("spd", &[n]) => ManifoldSpec::Spd { n },
        ("grassmann", &[p, n]) => ManifoldSpec::Grassmann { p, n },
        ("stiefel", &[p, n]) => ManifoldSpec::Stiefel { p, n },
        _ => return Err(usage()),
    };
    spec.validate()?;
    Ok(spec)
}
