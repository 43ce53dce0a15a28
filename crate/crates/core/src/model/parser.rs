use std::collections::HashMap;

use crate::disruptions::{BreakdownClock, BreakdownSpec, DisruptionSpec, WeatherSpec};
use crate::error::{ParseErrors, SyntaxError};
use crate::model::expr::{parse_expr, parse_formula};
use crate::model::lexer::{tokenize, Tok, Token};
use crate::model::{ElementDef, ElementKind, Link, ModelDef, Request, ResourceDecl, StateDecl, Submodel};
use crate::sim::Value;
use crate::stochastics::Distribution;

/// Source positions of parsed declarations, for diagnostics.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SourceMap {
    pub model: (usize, usize),
    pub elements: HashMap<String, (usize, usize)>,
    pub resources: HashMap<String, (usize, usize)>,
    pub submodels: HashMap<String, (usize, usize)>,
    pub links: Vec<(usize, usize)>,
    /// First link line naming each endpoint, declared or not.
    pub link_mentions: HashMap<String, (usize, usize)>,
}

impl SourceMap {
    /// Best position for a diagnostic about `subject` (element, resource or
    /// submodel name); falls back to the model header.
    pub fn locate(&self, subject: Option<&str>) -> (usize, usize) {
        subject
            .and_then(|s| {
                self.elements
                    .get(s)
                    .or_else(|| self.resources.get(s))
                    .or_else(|| self.submodels.get(s))
                    .or_else(|| self.link_mentions.get(s))
            })
            .copied()
            .unwrap_or(self.model)
    }
}

pub(crate) type PResult<T> = Result<T, SyntaxError>;

/// Parsed right-hand side of `key=value`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum PValue {
    Num(f64),
    List(Vec<f64>),
    Ident(String),
    Str(String),
    Dist(Distribution),
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Param {
    Kv(String, PValue),
    Pair(String, f64),
    Flag(String),
    Str(String),
}

#[derive(Debug, Clone)]
pub(crate) struct Located<T> {
    pub item: T,
    pub line: usize,
    pub col: usize,
}

/// Cursor over one line of tokens (no trailing newline).
pub(crate) struct Line<'a> {
    pub toks: &'a [Token],
    pub pos: usize,
    pub line: usize,
}

impl<'a> Line<'a> {
    pub fn new(toks: &'a [Token], line: usize) -> Self {
        Line { toks, pos: 0, line }
    }

    pub fn peek(&self) -> Option<&'a Token> {
        self.toks.get(self.pos)
    }

    fn here(&self) -> (usize, usize) {
        match self.peek() {
            Some(t) => (t.line, t.col),
            None => self.toks.last().map(|t| (t.line, t.col + 1)).unwrap_or((self.line, 1)),
        }
    }

    pub fn error<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let (l, c) = self.here();
        Err(SyntaxError::new(l, c, msg))
    }

    pub fn next(&mut self) -> Option<&'a Token> {
        let t = self.toks.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    pub fn eat(&mut self, want: &Tok) -> bool {
        if self.peek().map(|t| &t.tok) == Some(want) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn expect(&mut self, want: &Tok) -> PResult<()> {
        if self.eat(want) {
            Ok(())
        } else {
            let found = self
                .peek()
                .map(|t| t.tok.to_string())
                .unwrap_or_else(|| "end of line".into());
            self.error(format!("expected {want}, found {found}"))
        }
    }

    pub fn ident(&mut self, what: &str) -> PResult<String> {
        match self.peek() {
            Some(Token { tok: Tok::Ident(s), .. }) => {
                self.pos += 1;
                Ok(s.clone())
            }
            Some(t) => self.error(format!("expected {what}, found {}", t.tok)),
            None => self.error(format!("expected {what}")),
        }
    }

    pub fn number(&mut self, what: &str) -> PResult<f64> {
        match self.peek() {
            Some(Token { tok: Tok::Num(x), .. }) => {
                self.pos += 1;
                Ok(*x)
            }
            Some(t) => self.error(format!("expected {what}, found {}", t.tok)),
            None => self.error(format!("expected {what}")),
        }
    }

    pub fn finish(&self) -> PResult<()> {
        match self.peek() {
            None => Ok(()),
            Some(t) => self.error(format!("unexpected {} at end of declaration", t.tok)),
        }
    }

    /// `const(..)`, `uniform(..)`, `tri(..)`, `exp(..)`, `bern(..)`, `disc(v:w, ..)`.
    pub fn distribution(&mut self, name: &str) -> PResult<Distribution> {
        let (l, c) = self.here();
        self.expect(&Tok::LParen)?;
        let d = if name == "disc" {
            let mut outcomes = Vec::new();
            loop {
                let v = self.number("value")?;
                self.expect(&Tok::Colon)?;
                let w = self.number("weight")?;
                outcomes.push((v, w));
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            Distribution::Discrete { outcomes }
        } else {
            let mut args = vec![self.number("distribution argument")?];
            while self.eat(&Tok::Comma) {
                args.push(self.number("distribution argument")?);
            }
            let want = match name {
                "const" | "exp" | "bern" => 1,
                "uniform" => 2,
                "tri" => 3,
                other => return Err(SyntaxError::new(l, c, format!("unknown distribution `{other}`"))),
            };
            if args.len() != want {
                return Err(SyntaxError::new(
                    l,
                    c,
                    format!("`{name}` takes {want} argument(s), got {}", args.len()),
                ));
            }
            match name {
                "const" => Distribution::Constant { value: args[0] },
                "exp" => Distribution::Exponential { mean: args[0] },
                "bern" => Distribution::Bernoulli { p: args[0] },
                "uniform" => Distribution::Uniform {
                    low: args[0],
                    high: args[1],
                },
                _ => Distribution::Triangular {
                    low: args[0],
                    mode: args[1],
                    high: args[2],
                },
            }
        };
        self.expect(&Tok::RParen)?;
        d.validate().map_err(|e| SyntaxError::new(l, c, e.to_string()))?;
        Ok(d)
    }

    pub fn value(&mut self) -> PResult<PValue> {
        match self.peek().map(|t| t.tok.clone()) {
            Some(Tok::Num(x)) => {
                self.pos += 1;
                if self.eat(&Tok::Comma) {
                    let mut xs = vec![x, self.number("list item")?];
                    while self.eat(&Tok::Comma) {
                        xs.push(self.number("list item")?);
                    }
                    Ok(PValue::List(xs))
                } else {
                    Ok(PValue::Num(x))
                }
            }
            Some(Tok::Ident(s)) => {
                self.pos += 1;
                if self.peek().map(|t| &t.tok) == Some(&Tok::LParen) {
                    Ok(PValue::Dist(self.distribution(&s)?))
                } else {
                    Ok(PValue::Ident(s))
                }
            }
            Some(Tok::Str(s)) => {
                self.pos += 1;
                Ok(PValue::Str(s))
            }
            Some(t) => self.error(format!("expected a value, found {t}")),
            None => self.error("expected a value"),
        }
    }

    pub fn params(&mut self) -> PResult<Vec<Located<Param>>> {
        let mut out = Vec::new();
        while let Some(t) = self.peek() {
            let (line, col) = (t.line, t.col);
            let item = match &t.tok {
                Tok::Str(s) => {
                    self.pos += 1;
                    Param::Str(s.clone())
                }
                Tok::Ident(name) => {
                    let name = name.clone();
                    self.pos += 1;
                    if self.eat(&Tok::Eq) {
                        Param::Kv(name, self.value()?)
                    } else if self.eat(&Tok::Colon) {
                        Param::Pair(name, self.number("server count")?)
                    } else {
                        Param::Flag(name)
                    }
                }
                other => return self.error(format!("unexpected {other}")),
            };
            out.push(Located { item, line, col });
        }
        Ok(out)
    }
}

/// Typed access to a parameter list, rejecting unknown and duplicate keys.
pub(crate) struct Params {
    items: Vec<Located<Param>>,
    used: Vec<bool>,
    origin: (usize, usize),
}

impl Params {
    pub fn new(items: Vec<Located<Param>>, origin: (usize, usize)) -> Self {
        let used = vec![false; items.len()];
        Params { items, used, origin }
    }

    fn err_at<T>(&self, i: usize, msg: impl Into<String>) -> PResult<T> {
        let it = &self.items[i];
        Err(SyntaxError::new(it.line, it.col, msg))
    }

    fn find(&mut self, key: &str) -> PResult<Option<(usize, PValue)>> {
        let mut hit = None;
        for (i, it) in self.items.iter().enumerate() {
            if let Param::Kv(k, v) = &it.item {
                if k == key {
                    if hit.is_some() {
                        return self.err_at(i, format!("duplicate parameter `{key}`"));
                    }
                    hit = Some((i, v.clone()));
                }
            }
        }
        if let Some((i, _)) = hit {
            self.used[i] = true;
        }
        Ok(hit)
    }

    pub fn all(&mut self, key: &str) -> Vec<(usize, PValue)> {
        let mut out = Vec::new();
        for (i, it) in self.items.iter().enumerate() {
            if let Param::Kv(k, v) = &it.item {
                if k == key {
                    self.used[i] = true;
                    out.push((i, v.clone()));
                }
            }
        }
        out
    }

    pub fn missing<T>(&self, key: &str) -> PResult<T> {
        Err(SyntaxError::new(
            self.origin.0,
            self.origin.1,
            format!("missing parameter `{key}`"),
        ))
    }

    pub fn num(&mut self, key: &str) -> PResult<Option<f64>> {
        match self.find(key)? {
            None => Ok(None),
            Some((_, PValue::Num(x))) => Ok(Some(x)),
            Some((i, _)) => self.err_at(i, format!("`{key}` expects a number")),
        }
    }

    pub fn int(&mut self, key: &str, max: u64) -> PResult<Option<u64>> {
        match self.find(key)? {
            None => Ok(None),
            Some((i, PValue::Num(x))) => match as_count(x, max) {
                Some(n) => Ok(Some(n)),
                None => self.err_at(i, format!("`{key}` expects a whole number in 0..={max}")),
            },
            Some((i, _)) => self.err_at(i, format!("`{key}` expects a whole number")),
        }
    }

    pub fn ident(&mut self, key: &str) -> PResult<Option<String>> {
        match self.find(key)? {
            None => Ok(None),
            Some((_, PValue::Ident(s))) => Ok(Some(s)),
            Some((i, _)) => self.err_at(i, format!("`{key}` expects a name")),
        }
    }

    pub fn boolean(&mut self, key: &str) -> PResult<Option<bool>> {
        match self.find(key)? {
            None => Ok(None),
            Some((_, PValue::Ident(s))) if s == "true" || s == "on" => Ok(Some(true)),
            Some((_, PValue::Ident(s))) if s == "false" || s == "off" => Ok(Some(false)),
            Some((i, _)) => self.err_at(i, format!("`{key}` expects true or false")),
        }
    }

    pub fn dist(&mut self, key: &str) -> PResult<Option<Distribution>> {
        match self.find(key)? {
            None => Ok(None),
            Some((_, PValue::Dist(d))) => Ok(Some(d)),
            Some((i, _)) => self.err_at(i, format!("`{key}` expects a distribution such as const(3)")),
        }
    }

    pub fn list(&mut self, key: &str) -> PResult<Option<Vec<f64>>> {
        match self.find(key)? {
            None => Ok(None),
            Some((_, PValue::List(xs))) => Ok(Some(xs)),
            Some((_, PValue::Num(x))) => Ok(Some(vec![x])),
            Some((i, _)) => self.err_at(i, format!("`{key}` expects a comma-separated list of numbers")),
        }
    }

    pub fn flag(&mut self, name: &str) -> bool {
        let mut hit = false;
        for (i, it) in self.items.iter().enumerate() {
            if matches!(&it.item, Param::Flag(f) if f == name) {
                self.used[i] = true;
                hit = true;
            }
        }
        hit
    }

    pub fn pairs(&mut self) -> PResult<Vec<Request>> {
        let mut out = Vec::new();
        for i in 0..self.items.len() {
            if let Param::Pair(name, n) = &self.items[i].item {
                let (name, n) = (name.clone(), *n);
                self.used[i] = true;
                match as_count(n, u32::MAX as u64) {
                    Some(k) if k >= 1 => out.push(Request {
                        resource: name,
                        servers: k as u32,
                    }),
                    _ => return self.err_at(i, "server count must be a whole number >= 1"),
                }
            }
        }
        Ok(out)
    }

    pub fn positional_string(&mut self) -> Option<(usize, String)> {
        for i in 0..self.items.len() {
            if let Param::Str(s) = &self.items[i].item {
                if !self.used[i] {
                    self.used[i] = true;
                    return Some((i, s.clone()));
                }
            }
        }
        None
    }

    pub fn finish(&self) -> PResult<()> {
        if let Some(i) = self.used.iter().position(|u| !u) {
            let what = match &self.items[i].item {
                Param::Kv(k, _) => format!("unknown parameter `{k}`"),
                Param::Pair(k, _) => format!("unexpected resource request `{k}`"),
                Param::Flag(f) => format!("unexpected word `{f}`"),
                Param::Str(_) => "unexpected string".to_string(),
            };
            return self.err_at(i, what);
        }
        Ok(())
    }
}

pub(crate) fn as_count(x: f64, max: u64) -> Option<u64> {
    (x >= 0.0 && x.fract() == 0.0 && x <= max as f64).then_some(x as u64)
}

/// Splits a token stream into non-empty lines.
pub(crate) fn lines(toks: &[Token]) -> Vec<&[Token]> {
    toks.split(|t| t.tok == Tok::Newline)
        .filter(|l| !l.is_empty())
        .collect()
}

fn element(kind: &str, id: String, mut p: Params) -> PResult<ElementDef> {
    let kind = match kind {
        "create" => ElementKind::Create {
            count: p.int("count", u64::MAX >> 11)?.unwrap_or(1),
            interarrival: p.dist("interarrival")?.unwrap_or(Distribution::constant(0.0)),
            daemon: p.flag("daemon"),
        },
        "task" => {
            let duration = match p.dist("dur")? {
                Some(d) => d,
                None => return p.missing("dur"),
            };
            let mut tags = Vec::new();
            for (i, v) in p.all("sensitive") {
                match v {
                    PValue::Ident(s) => tags.push(s),
                    _ => return p.err_at(i, "`sensitive` expects a tag name"),
                }
            }
            ElementKind::Task {
                duration,
                tags,
                valve: p.ident("valve")?,
                usage: p.ident("usage")?,
            }
        }
        "capture" => ElementKind::Capture {
            requests: p.pairs()?,
            file: p.ident("file")?,
        },
        "release" => ElementKind::Release { releases: p.pairs()? },
        "preempt" => match p.ident("resource")? {
            Some(resource) => ElementKind::Preempt { resource },
            None => return p.missing("resource"),
        },
        "batch" => ElementKind::Batch {
            size: p.int("n", u32::MAX as u64)?.unwrap_or(1) as u32,
        },
        "unbatch" => ElementKind::Unbatch,
        "generate" => ElementKind::Generate {
            clones: p.int("clones", u32::MAX as u64)?.unwrap_or(1) as u32,
        },
        "consolidate" => ElementKind::Consolidate {
            size: p.int("n", u32::MAX as u64)?.unwrap_or(1) as u32,
        },
        "conditional_branch" => match p.positional_string() {
            Some((i, src)) => match parse_expr(&src) {
                Ok(predicate) => ElementKind::ConditionalBranch { predicate },
                Err(e) => return p.err_at(i, format!("bad predicate: {e}")),
            },
            None => return p.missing("predicate string"),
        },
        "probabilistic_branch" => match p.list("probs")? {
            Some(probs) => ElementKind::ProbabilisticBranch { probs },
            None => return p.missing("probs"),
        },
        "valve" => match p.ident("state")? {
            Some(state) => ElementKind::Valve { state },
            None => return p.missing("state"),
        },
        "activator" => {
            let valve = match p.ident("valve")? {
                Some(v) => v,
                None => return p.missing("valve"),
            };
            let open = match p.boolean("open")? {
                Some(b) => b,
                None => return p.missing("open"),
            };
            ElementKind::Activator { valve, open }
        }
        "execute" => match p.positional_string() {
            Some((i, src)) => match parse_formula(&src) {
                Ok(formula) => ElementKind::Execute { formula },
                Err(e) => return p.err_at(i, format!("bad formula: {e}")),
            },
            None => return p.missing("formula string"),
        },
        "counter" => ElementKind::Counter {
            tally: p.ident("name")?,
        },
        "destroy" => ElementKind::Destroy,
        _ => unreachable!("caller checks keywords"),
    };
    p.finish()?;
    Ok(ElementDef { id, kind })
}

fn disruption(kind: &str, mut p: Params) -> PResult<DisruptionSpec> {
    let spec = match kind {
        "weather" => {
            let valve = match p.ident("valve")? {
                Some(v) => v,
                None => return p.missing("valve"),
            };
            let d = WeatherSpec::default();
            DisruptionSpec::Weather(WeatherSpec {
                cycle_days: p.num("cycle")?.unwrap_or(d.cycle_days),
                probability: p.num("p")?.unwrap_or(d.probability),
                outage: p.dist("outage")?.unwrap_or(d.outage),
                valve,
                tag: p.ident("tag")?.unwrap_or(d.tag),
            })
        }
        "breakdown" => {
            let resource = match p.ident("resource")? {
                Some(r) => r,
                None => return p.missing("resource"),
            };
            let d = BreakdownSpec::new(&resource);
            let clock = match p.ident("clock")?.as_deref() {
                None => d.clock,
                Some("usage") => BreakdownClock::Usage,
                Some("calendar") => BreakdownClock::Calendar,
                Some(other) => {
                    let (l, c) = p.origin;
                    return Err(SyntaxError::new(
                        l,
                        c,
                        format!("clock must be usage or calendar, got `{other}`"),
                    ));
                }
            };
            DisruptionSpec::Breakdown(BreakdownSpec {
                resource,
                trigger: p.dist("trigger")?.unwrap_or(d.trigger),
                p_major: p.num("p_major")?.unwrap_or(d.p_major),
                minor_repair: p.dist("minor")?.unwrap_or(d.minor_repair),
                major_repair: p.dist("major")?.unwrap_or(d.major_repair),
                clock,
            })
        }
        other => {
            let (l, c) = p.origin;
            return Err(SyntaxError::new(
                l,
                c,
                format!("unknown disruption `{other}` (expected weather or breakdown)"),
            ));
        }
    };
    p.finish()?;
    Ok(spec)
}

enum Ctx {
    Top,
    Model,
    Submodel {
        name: String,
        enabled: bool,
        spec: Option<DisruptionSpec>,
        at: (usize, usize),
    },
    Done,
}

/// Parses model text. Either every declaration parses or all syntax errors
/// are returned.
pub fn parse(text: &str) -> Result<ModelDef, ParseErrors> {
    parse_with_source_map(text).map(|(m, _)| m)
}

pub fn parse_with_source_map(text: &str) -> Result<(ModelDef, SourceMap), ParseErrors> {
    let (toks, mut errors) = tokenize(text);
    let mut model = ModelDef {
        name: String::new(),
        length_m: 100.0,
        resources: Vec::new(),
        files: Vec::new(),
        states: Vec::new(),
        elements: Vec::new(),
        links: Vec::new(),
        submodels: Vec::new(),
    };
    let mut map = SourceMap::default();
    let mut raw_links: Vec<(String, String, (usize, usize))> = Vec::new();
    let mut ctx = Ctx::Top;
    let mut seen_model = false;

    for line_toks in lines(&toks) {
        let first = &line_toks[0];
        let mut line = Line::new(line_toks, first.line);
        let result: PResult<()> = (|| {
            match &mut ctx {
                Ctx::Top => {
                    let kw = line.ident("`model`")?;
                    if kw != "model" {
                        return Err(SyntaxError::new(first.line, first.col, "expected `model <name> {`"));
                    }
                    model.name = line.ident("model name")?;
                    line.expect(&Tok::LBrace)?;
                    line.finish()?;
                    map.model = (first.line, first.col);
                    seen_model = true;
                    ctx = Ctx::Model;
                }
                Ctx::Done => {
                    return Err(SyntaxError::new(
                        first.line,
                        first.col,
                        "unexpected input after model block",
                    ));
                }
                Ctx::Submodel {
                    name,
                    enabled,
                    spec,
                    at,
                } => {
                    if line.eat(&Tok::RBrace) {
                        line.finish()?;
                        let Some(spec) = spec.take() else {
                            return Err(SyntaxError::new(at.0, at.1, format!("submodel `{name}` is empty")));
                        };
                        model.submodels.push(Submodel {
                            name: name.clone(),
                            enabled: *enabled,
                            spec,
                        });
                        ctx = Ctx::Model;
                        return Ok(());
                    }
                    if spec.is_some() {
                        return Err(SyntaxError::new(
                            first.line,
                            first.col,
                            "a submodel holds exactly one disruption declaration",
                        ));
                    }
                    let kind = line.ident("disruption kind")?;
                    let params = Params::new(line.params()?, (first.line, first.col));
                    *spec = Some(disruption(&kind, params)?);
                }
                Ctx::Model => {
                    if line.eat(&Tok::RBrace) {
                        line.finish()?;
                        ctx = Ctx::Done;
                        return Ok(());
                    }
                    let kw = line.ident("declaration")?;
                    match kw.as_str() {
                        "length" => {
                            line.expect(&Tok::Eq)?;
                            model.length_m = line.number("length in metres")?;
                            line.finish()?;
                        }
                        "resource" => {
                            let name = line.ident("resource name")?;
                            let mut p = Params::new(line.params()?, (first.line, first.col));
                            let servers = match p.int("servers", u32::MAX as u64)? {
                                Some(n) => n as u32,
                                None => return p.missing("servers"),
                            };
                            p.finish()?;
                            map.resources.insert(name.clone(), (first.line, first.col));
                            model.resources.push(ResourceDecl { name, servers });
                        }
                        "file" => {
                            let name = line.ident("file name")?;
                            line.finish()?;
                            model.files.push(name);
                        }
                        "state" => {
                            let name = line.ident("state name")?;
                            line.expect(&Tok::Eq)?;
                            let init = match line.value()? {
                                PValue::Num(x) => Value::Num(x),
                                PValue::Ident(s) if s == "true" => Value::Bool(true),
                                PValue::Ident(s) if s == "false" => Value::Bool(false),
                                _ => return line.error("state initial value must be a number, true or false"),
                            };
                            line.finish()?;
                            model.states.push(StateDecl { name, init });
                        }
                        "link" => {
                            let from = line.ident("source element")?;
                            line.expect(&Tok::Arrow)?;
                            let to = line.ident("target element")?;
                            line.finish()?;
                            raw_links.push((from, to, (first.line, first.col)));
                        }
                        "submodel" => {
                            let name = line.ident("submodel name")?;
                            let mut enabled = true;
                            if line.peek().map(|t| &t.tok) == Some(&Tok::Ident("enabled".into())) {
                                line.next();
                                line.expect(&Tok::Eq)?;
                                enabled = match line.ident("true or false")?.as_str() {
                                    "true" | "on" => true,
                                    "false" | "off" => false,
                                    _ => return line.error("enabled expects true or false"),
                                };
                            }
                            line.expect(&Tok::LBrace)?;
                            line.finish()?;
                            map.submodels.insert(name.clone(), (first.line, first.col));
                            ctx = Ctx::Submodel {
                                name,
                                enabled,
                                spec: None,
                                at: (first.line, first.col),
                            };
                        }
                        "model" => {
                            return Err(SyntaxError::new(
                                first.line,
                                first.col,
                                "nested model blocks are not allowed",
                            ))
                        }
                        kind if crate::model::ELEMENT_KEYWORDS.contains(&kind) => {
                            let id = line.ident("element id")?;
                            let params = Params::new(line.params()?, (first.line, first.col));
                            let el = element(kind, id, params)?;
                            map.elements.insert(el.id.clone(), (first.line, first.col));
                            model.elements.push(el);
                        }
                        other => {
                            return Err(SyntaxError::new(
                                first.line,
                                first.col,
                                format!("unknown declaration `{other}`"),
                            ))
                        }
                    }
                }
            }
            Ok(())
        })();
        if let Err(e) = result {
            errors.push(e);
        }
    }

    match ctx {
        Ctx::Top if !seen_model => {
            errors.push(SyntaxError::new(1, 1, "no model block"));
        }
        Ctx::Model | Ctx::Submodel { .. } => {
            let (l, c) = toks.last().map(|t| (t.line, t.col)).unwrap_or((1, 1));
            errors.push(SyntaxError::new(l, c, "unclosed block: missing `}`"));
        }
        _ => {}
    }

    // Resolve `a.1` port suffixes now that every element id is known.
    let ids: std::collections::HashSet<&str> = model.elements.iter().map(|e| e.id.as_str()).collect();
    for (from, to, at) in raw_links {
        let (from, port) = if ids.contains(from.as_str()) {
            (from, 0)
        } else {
            match from.rsplit_once('.') {
                Some((head, tail)) if ids.contains(head) => match tail.parse::<u32>() {
                    Ok(p) => (head.to_string(), p),
                    Err(_) => (from, 0),
                },
                _ => (from, 0),
            }
        };
        map.links.push(at);
        map.link_mentions.entry(from.clone()).or_insert(at);
        map.link_mentions.entry(to.clone()).or_insert(at);
        model.links.push(Link { from, port, to });
    }

    if errors.is_empty() {
        Ok((model, map))
    } else {
        errors.sort_by_key(|e| (e.line, e.col));
        Err(ParseErrors(errors))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ok(src: &str) -> ModelDef {
        match parse(src) {
            Ok(m) => m,
            Err(e) => panic!("{e:?}"),
        }
    }

    #[test]
    fn resource_declaration() {
        let m = ok("model m {\n resource Crane servers=1\n}\n");
        assert_eq!(
            m.resources,
            vec![ResourceDecl {
                name: "Crane".into(),
                servers: 1
            }]
        );
    }

    #[test]
    fn empty_input_has_no_model_block() {
        let e = parse("").unwrap_err();
        assert_eq!(e.0[0].message, "no model block");
        let e = parse("   # only a comment\n").unwrap_err();
        assert_eq!(e.0[0].message, "no model block");
    }

    #[test]
    fn triangular_with_mode_below_low_is_rejected() {
        let e = parse("model m {\n task T dur=tri(4,3,5)\n}\n").unwrap_err();
        assert_eq!(e.0.len(), 1);
        assert_eq!(e.0[0].line, 2);
        assert!(e.0[0].message.contains("a <= m <= b"), "{}", e.0[0].message);
    }

    #[test]
    fn every_bad_line_is_reported() {
        let e = parse("model m {\n task a\n bogus x\n resource R servers=-1\n}\n").unwrap_err();
        let lines: Vec<usize> = e.0.iter().map(|e| e.line).collect();
        assert_eq!(lines, vec![2, 3, 4]);
    }

    #[test]
    fn link_ports_resolve_against_element_ids() {
        let m = ok(
            "model m {\n probabilistic_branch br probs=0.3,0.7\n destroy x.1\n link br.1 -> x.1\n link x.1 -> br\n}\n",
        );
        assert_eq!(
            m.links[0],
            Link {
                from: "br".into(),
                port: 1,
                to: "x.1".into()
            }
        );
        assert_eq!(m.links[1].from, "x.1");
        assert_eq!(m.links[1].port, 0);
    }

    #[test]
    fn submodels() {
        let m = ok("model m {\n submodel wx enabled=false {\n  weather valve=v p=0.3 cycle=10 outage=exp(0.5)\n }\n submodel cb {\n  breakdown resource=Crane trigger=const(5) clock=calendar\n }\n}\n");
        assert_eq!(m.submodels.len(), 2);
        assert!(!m.submodels[0].enabled);
        match &m.submodels[1].spec {
            DisruptionSpec::Breakdown(b) => assert_eq!(b.clock, BreakdownClock::Calendar),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unclosed_and_trailing() {
        assert!(parse("model m {\n").is_err());
        assert!(parse("model m {\n}\nresource R servers=1\n").is_err());
    }

    #[test]
    fn element_params() {
        let m = ok(concat!(
            "model m {\n",
            " create c count=3 interarrival=const(2) daemon\n",
            " task t dur=exp(2) sensitive=weather valve=v usage=Crane\n",
            " capture k Crane:1 Crew:2 file=q\n",
            " conditional_branch cb \"damaged > 0.5\"\n",
            " execute e \"done = done + 1\"\n",
            " activator a valve=v open=false\n",
            "}\n"
        ));
        assert_eq!(
            m.elements[0].kind,
            ElementKind::Create {
                count: 3,
                interarrival: Distribution::constant(2.0),
                daemon: true
            }
        );
        match &m.elements[2].kind {
            ElementKind::Capture { requests, file } => {
                assert_eq!(requests.len(), 2);
                assert_eq!(requests[1].servers, 2);
                assert_eq!(file.as_deref(), Some("q"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_and_duplicate_params() {
        assert!(parse("model m {\n task t dur=const(1) dur=const(2)\n}\n").is_err());
        assert!(parse("model m {\n task t dur=const(1) speed=3\n}\n").is_err());
        assert!(parse("model m {\n batch b n=2.5\n}\n").is_err());
    }
}
