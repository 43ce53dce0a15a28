use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::error::{ParseErrors, SyntaxError};
use crate::model::lexer::{tokenize, Tok};
use crate::model::parser::{as_count, lines, Line, PResult};

pub const DEFAULT_REPLICATIONS: u32 = 100;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DurationNoise {
    #[default]
    Off,
    /// Wrap each constant foreground task duration `d` as `tri(0.9d, d, 1.1d)`.
    Triangular10,
}

/// A what-if configuration applied on top of a model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOverlay {
    pub name: String,
    pub resource_overrides: BTreeMap<String, u32>,
    pub submodel_toggles: BTreeMap<String, bool>,
    pub duration_noise: DurationNoise,
    /// `None` falls back to the caller's default (100).
    pub replications: Option<u32>,
    /// `None` falls back to the caller's default (42).
    pub master_seed: Option<u64>,
    pub comment: String,
}

impl ScenarioOverlay {
    pub fn new(name: impl Into<String>) -> Self {
        ScenarioOverlay {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn reps(&self) -> u32 {
        self.replications.unwrap_or(DEFAULT_REPLICATIONS)
    }

    pub fn seed(&self) -> u64 {
        self.master_seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn with_resource(mut self, name: &str, servers: u32) -> Self {
        self.resource_overrides.insert(name.to_string(), servers);
        self
    }

    pub fn with_submodel(mut self, name: &str, on: bool) -> Self {
        self.submodel_toggles.insert(name.to_string(), on);
        self
    }

    /// Settings of `prev` that this overlay retracts: a submodel switched
    /// back off or a resource count lowered.
    pub fn retractions(&self, prev: &ScenarioOverlay) -> Vec<String> {
        let mut out = Vec::new();
        for (name, &on) in &prev.submodel_toggles {
            if on && self.submodel_toggles.get(name) != Some(&true) {
                out.push(format!("submodel `{name}` switched off"));
            }
        }
        for (name, &k) in &prev.resource_overrides {
            match self.resource_overrides.get(name) {
                Some(&now) if now >= k => {}
                Some(&now) => out.push(format!("resource `{name}` lowered from {k} to {now}")),
                None => out.push(format!("resource `{name}` override dropped")),
            }
        }
        out
    }
}

fn setting(line: &mut Line, sc: &mut ScenarioOverlay) -> PResult<()> {
    let key = line.ident("setting")?;
    match key.as_str() {
        "reps" | "replications" => {
            line.expect(&Tok::Eq)?;
            let x = line.number("replication count")?;
            match as_count(x, u32::MAX as u64) {
                Some(n) if n >= 1 => sc.replications = Some(n as u32),
                _ => return line.error("replications must be a whole number >= 1"),
            }
        }
        "seed" => {
            line.expect(&Tok::Eq)?;
            let x = line.number("seed")?;
            match as_count(x, 1 << 53) {
                Some(n) => sc.master_seed = Some(n),
                None => return line.error("seed must be a whole number in 0..=2^53"),
            }
        }
        "noise" => {
            line.expect(&Tok::Eq)?;
            sc.duration_noise = match line.ident("off or triangular10")?.as_str() {
                "off" => DurationNoise::Off,
                "triangular10" => DurationNoise::Triangular10,
                _ => return line.error("noise must be off or triangular10"),
            };
        }
        "comment" => {
            line.expect(&Tok::Eq)?;
            match line.next().map(|t| &t.tok) {
                Some(Tok::Str(s)) => sc.comment = s.clone(),
                _ => return line.error("comment expects a quoted string"),
            }
        }
        "submodel" => {
            let name = line.ident("submodel name")?;
            line.expect(&Tok::Eq)?;
            let on = match line.ident("on or off")?.as_str() {
                "on" | "true" => true,
                "off" | "false" => false,
                _ => return line.error("expected on or off"),
            };
            sc.submodel_toggles.insert(name, on);
        }
        "resource" => {
            let name = line.ident("resource name")?;
            line.expect(&Tok::Eq)?;
            let x = line.number("server count")?;
            match as_count(x, u32::MAX as u64) {
                Some(n) if n >= 1 => {
                    sc.resource_overrides.insert(name, n as u32);
                }
                _ => return line.error("server count must be a whole number >= 1"),
            }
        }
        other => return line.error(format!("unknown scenario setting `{other}`")),
    }
    line.finish()
}

/// Parses a scenario file. `extends` clauses are resolved here, so every
/// returned overlay is self-contained.
pub fn parse_scenarios(text: &str) -> Result<Vec<ScenarioOverlay>, ParseErrors> {
    let (toks, mut errors) = tokenize(text);
    let mut out: Vec<ScenarioOverlay> = Vec::new();
    let mut current: Option<ScenarioOverlay> = None;

    for lt in lines(&toks) {
        let mut line = Line::new(lt, lt[0].line);
        let res: PResult<()> = (|| {
            if let Some(sc) = current.as_mut() {
                if line.eat(&Tok::RBrace) {
                    line.finish()?;
                    out.push(current.take().expect("inside a block"));
                    return Ok(());
                }
                return setting(&mut line, sc);
            }
            let kw = line.ident("`scenario`")?;
            if kw != "scenario" {
                return Err(SyntaxError::new(lt[0].line, lt[0].col, "expected `scenario <name> {`"));
            }
            let name = line.ident("scenario name")?;
            if out.iter().any(|s| s.name == name) {
                return line.error(format!("duplicate scenario `{name}`"));
            }
            let mut sc = ScenarioOverlay::new(name.clone());
            if line.peek().map(|t| &t.tok) == Some(&Tok::Ident("extends".into())) {
                line.next();
                let parent = line.ident("parent scenario")?;
                match out.iter().find(|s| s.name == parent) {
                    Some(p) => {
                        sc = p.clone();
                        sc.name = name;
                        sc.comment.clear();
                    }
                    None => return line.error(format!("`{parent}` is not an earlier scenario")),
                }
            }
            line.expect(&Tok::LBrace)?;
            // Allow a one-line `scenario x { }`.
            if line.eat(&Tok::RBrace) {
                line.finish()?;
                out.push(sc);
                return Ok(());
            }
            line.finish()?;
            current = Some(sc);
            Ok(())
        })();
        if let Err(e) = res {
            errors.push(e);
        }
    }
    if current.is_some() {
        let (l, c) = toks.last().map(|t| (t.line, t.col)).unwrap_or((1, 1));
        errors.push(SyntaxError::new(l, c, "unclosed scenario block"));
    }
    if out.is_empty() && errors.is_empty() {
        errors.push(SyntaxError::new(1, 1, "no scenario block"));
    }
    if errors.is_empty() {
        Ok(out)
    } else {
        errors.sort_by_key(|e| (e.line, e.col));
        Err(ParseErrors(errors))
    }
}

/// Writes overlays as flat (non-extending) scenario blocks.
pub fn write_scenarios(overlays: &[ScenarioOverlay]) -> String {
    let mut out = String::new();
    for sc in overlays {
        let _ = writeln!(out, "scenario {} {{", sc.name);
        if let Some(r) = sc.replications {
            let _ = writeln!(out, "  reps = {r}");
        }
        if let Some(s) = sc.master_seed {
            let _ = writeln!(out, "  seed = {s}");
        }
        if sc.duration_noise == DurationNoise::Triangular10 {
            out.push_str("  noise = triangular10\n");
        }
        for (name, on) in &sc.submodel_toggles {
            let _ = writeln!(out, "  submodel {name} = {}", if *on { "on" } else { "off" });
        }
        for (name, k) in &sc.resource_overrides {
            let _ = writeln!(out, "  resource {name} = {k}");
        }
        if !sc.comment.is_empty() {
            let esc = sc.comment.replace('\\', "\\\\").replace('"', "\\\"");
            let _ = writeln!(out, "  comment = \"{esc}\"");
        }
        out.push_str("}\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const LADDER: &str = r#"
# cumulative
scenario ideal {
  reps = 10
  seed = 7
}
scenario wet extends ideal {
  submodel weather = on
  comment = "rain"
}
scenario trucks extends wet {
  resource ConcreteTrucks = 8
}
"#;

    #[test]
    fn extends_is_cumulative() {
        let s = parse_scenarios(LADDER).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s[2].submodel_toggles.get("weather"), Some(&true));
        assert_eq!(s[2].resource_overrides.get("ConcreteTrucks"), Some(&8));
        assert_eq!(s[2].reps(), 10);
        assert_eq!(s[2].seed(), 7);
        assert_eq!(s[1].comment, "rain");
        assert!(s[2].comment.is_empty());
        assert!(s[2].retractions(&s[1]).is_empty());
        assert!(!s[0].retractions(&s[2]).is_empty());
    }

    #[test]
    fn round_trip() {
        let s = parse_scenarios(LADDER).unwrap();
        assert_eq!(parse_scenarios(&write_scenarios(&s)).unwrap(), s);
    }

    #[test]
    fn errors() {
        assert!(parse_scenarios("").is_err());
        assert!(parse_scenarios("scenario a extends b {\n}\n").is_err());
        assert!(parse_scenarios("scenario a {\n reps = 0\n}\n").is_err());
        assert!(parse_scenarios("scenario a {\n colour = 3\n}\n").is_err());
        assert!(parse_scenarios("scenario a {\n").is_err());
    }
}
