//! Analysis reports: a plain text rendering for people and a versioned,
//! line-oriented key/value document that parses back to the same data.

use std::fmt::Write as _;

use crate::fixpoint::{AnalysisEntry, AnalysisResult};
use crate::recurrence::{order_of, ClosedForm};
use crate::sizedtypes::Dir;

pub const FORMAT_HEADER: &str = "resbound-report";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Bounds {
    pub lb: String,
    pub ub: String,
    pub lb_order: String,
    pub ub_order: String,
}

impl Bounds {
    fn from_forms(lo: Option<&ClosedForm>, hi: Option<&ClosedForm>) -> Bounds {
        let show = |f: Option<&ClosedForm>, dflt: &str| {
            f.map(|f| f.main.to_string()).unwrap_or_else(|| dflt.into())
        };
        let order = |f: Option<&ClosedForm>, dflt: &str| {
            f.map(|f| order_of(f).to_string())
                .unwrap_or_else(|| dflt.into())
        };
        Bounds {
            lb: show(lo, "0"),
            ub: show(hi, "∞"),
            lb_order: order(lo, "0"),
            ub_order: order(hi, "∞"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VersionReport {
    pub name: String,
    pub pred: String,
    pub entry: bool,
    pub call: String,
    pub nf: String,
    pub det: String,
    pub solutions: Bounds,
    pub resources: Vec<(String, Bounds)>,
    pub outputs: Vec<(usize, String)>,
    pub diagnostics: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Report {
    pub program: String,
    pub resources: Vec<String>,
    pub versions: Vec<VersionReport>,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReportError {
    #[error("line {0}: {1}")]
    Syntax(usize, String),
    #[error("unsupported report format: {0}")]
    Header(String),
}

fn call_pattern(e: &AnalysisEntry) -> String {
    let args: Vec<String> = (0..e.pred.arity)
        .map(|i| {
            if let Some(s) = e.sig.inputs.get(&i) {
                s.to_string()
            } else if e.sig.opaque.contains(&i) {
                "?".into()
            } else {
                "out".into()
            }
        })
        .collect();
    format!("{}({})", e.pred.name, args.join(", "))
}

fn owned_by(diag: &str, version: &str) -> bool {
    diag.starts_with(&format!("{version}:")) || diag.starts_with(&format!("{version}/"))
}

impl Report {
    pub fn from_result(program: &str, r: &AnalysisResult) -> Report {
        let mut versions: Vec<&AnalysisEntry> = r.entries.iter().collect();
        versions.sort_by_key(|e| !e.entry);
        let versions: Vec<VersionReport> = versions
            .into_iter()
            .map(|e| VersionReport {
                name: e.version.clone(),
                pred: e.pred.to_string(),
                entry: e.entry,
                call: call_pattern(e),
                nf: e.nf.to_string(),
                det: e.det.to_string(),
                solutions: Bounds::from_forms(e.form("sol", Dir::Ge), e.form("sol", Dir::Le)),
                resources: r
                    .resources
                    .iter()
                    .map(|res| {
                        let (lo, hi) = e.resource(&res.name);
                        (res.name.clone(), Bounds::from_forms(lo, hi))
                    })
                    .collect(),
                outputs: e
                    .sig
                    .outputs
                    .keys()
                    .filter_map(|&p| e.output_schema(p).map(|s| (p + 1, s.to_string())))
                    .collect(),
                diagnostics: r
                    .diagnostics
                    .iter()
                    .filter(|d| owned_by(d, &e.version))
                    .cloned()
                    .collect(),
            })
            .collect();
        let global = r
            .diagnostics
            .iter()
            .filter(|d| !versions.iter().any(|v| owned_by(d, &v.name)))
            .cloned()
            .collect();
        Report {
            program: program.to_string(),
            resources: r.resources.iter().map(|x| x.name.clone()).collect(),
            versions,
            diagnostics: global,
        }
    }

    pub fn all_diagnostics(&self) -> impl Iterator<Item = &String> {
        self.diagnostics
            .iter()
            .chain(self.versions.iter().flat_map(|v| v.diagnostics.iter()))
    }

    pub fn entry(&self, pred_name: &str) -> Option<&VersionReport> {
        self.versions
            .iter()
            .find(|v| v.entry && v.pred.rsplit_once('/').map(|(n, _)| n) == Some(pred_name))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "program {}", self.program);
        for v in &self.versions {
            let _ = writeln!(s);
            let tag = if v.entry { "  [entry]" } else { "" };
            let _ = writeln!(s, "{}{tag}", v.name);
            let _ = writeln!(s, "  call       {}", v.call);
            let _ = writeln!(s, "  nf/det     {} / {}", v.nf, v.det);
            let _ = writeln!(s, "  solutions  {} .. {}", v.solutions.lb, v.solutions.ub);
            for (name, b) in &v.resources {
                let _ = writeln!(
                    s,
                    "  {name:<10} {} .. {}    order {} .. {}",
                    b.lb, b.ub, b.lb_order, b.ub_order
                );
            }
            for (p, o) in &v.outputs {
                let _ = writeln!(s, "  output {p:<3} {o}");
            }
            for d in &v.diagnostics {
                let _ = writeln!(s, "  note: {d}");
            }
        }
        if !self.diagnostics.is_empty() {
            let _ = writeln!(s);
            for d in &self.diagnostics {
                let _ = writeln!(s, "note: {d}");
            }
        }
        s
    }

    pub fn to_structured(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{FORMAT_HEADER} {FORMAT_VERSION}");
        let kv = |s: &mut String, indent: &str, k: &str, v: &str| {
            let _ = writeln!(s, "{indent}{k} = {}", escape(v));
        };
        kv(&mut s, "", "program", &self.program);
        for r in &self.resources {
            kv(&mut s, "", "resource", r);
        }
        for d in &self.diagnostics {
            kv(&mut s, "", "diagnostic", d);
        }
        for v in &self.versions {
            let _ = writeln!(s, "version {} {{", escape(&v.name));
            kv(&mut s, "  ", "pred", &v.pred);
            kv(
                &mut s,
                "  ",
                "entry",
                if v.entry { "true" } else { "false" },
            );
            kv(&mut s, "  ", "call", &v.call);
            kv(&mut s, "  ", "nf", &v.nf);
            kv(&mut s, "  ", "det", &v.det);
            let bounds = |s: &mut String, b: &Bounds| {
                kv(s, "    ", "lb", &b.lb);
                kv(s, "    ", "ub", &b.ub);
                kv(s, "    ", "lb.order", &b.lb_order);
                kv(s, "    ", "ub.order", &b.ub_order);
            };
            let _ = writeln!(s, "  solutions {{");
            bounds(&mut s, &v.solutions);
            let _ = writeln!(s, "  }}");
            for (name, b) in &v.resources {
                let _ = writeln!(s, "  cost {} {{", escape(name));
                bounds(&mut s, b);
                let _ = writeln!(s, "  }}");
            }
            for (p, o) in &v.outputs {
                kv(&mut s, "  ", &format!("output.{p}"), o);
            }
            for d in &v.diagnostics {
                kv(&mut s, "  ", "diagnostic", d);
            }
            let _ = writeln!(s, "}}");
        }
        s
    }

    pub fn parse_structured(src: &str) -> Result<Report, ReportError> {
        let mut lines = src
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        match lines.next() {
            Some((_, h)) if h == format!("{FORMAT_HEADER} {FORMAT_VERSION}") => {}
            Some((_, h)) => return Err(ReportError::Header(h.to_string())),
            None => return Err(ReportError::Header(String::new())),
        }
        let mut r = Report::default();
        enum Block {
            Top,
            Version,
            Bounds(Option<String>),
        }
        let mut block = Block::Top;
        for (n, line) in lines {
            let err = |m: &str| ReportError::Syntax(n, m.to_string());
            if line == "}" {
                block = match block {
                    Block::Bounds(_) => Block::Version,
                    Block::Version => Block::Top,
                    Block::Top => return Err(err("unbalanced '}'")),
                };
                continue;
            }
            if let Some(head) = line.strip_suffix('{') {
                let head = head.trim();
                block = match (&block, head.split_once(' ')) {
                    (Block::Top, Some(("version", name))) => {
                        r.versions.push(VersionReport {
                            name: unescape(name),
                            ..Default::default()
                        });
                        Block::Version
                    }
                    (Block::Version, None) if head == "solutions" => Block::Bounds(None),
                    (Block::Version, Some(("cost", name))) => {
                        let name = unescape(name);
                        r.versions
                            .last_mut()
                            .ok_or_else(|| err("cost outside version"))?
                            .resources
                            .push((name.clone(), Bounds::default()));
                        Block::Bounds(Some(name))
                    }
                    _ => return Err(err("unexpected block")),
                };
                continue;
            }
            let (k, v) = line
                .split_once(" = ")
                .ok_or_else(|| err("expected 'key = value'"))?;
            let v = unescape(v);
            match &block {
                Block::Top => match k {
                    "program" => r.program = v,
                    "resource" => r.resources.push(v),
                    "diagnostic" => r.diagnostics.push(v),
                    _ => return Err(err(&format!("unknown key '{k}'"))),
                },
                Block::Version => {
                    let ver = r.versions.last_mut().ok_or_else(|| err("no version"))?;
                    match k {
                        "pred" => ver.pred = v,
                        "entry" => ver.entry = v == "true",
                        "call" => ver.call = v,
                        "nf" => ver.nf = v,
                        "det" => ver.det = v,
                        "diagnostic" => ver.diagnostics.push(v),
                        _ => match k.strip_prefix("output.").and_then(|p| p.parse().ok()) {
                            Some(p) => ver.outputs.push((p, v)),
                            None => return Err(err(&format!("unknown key '{k}'"))),
                        },
                    }
                }
                Block::Bounds(which) => {
                    let ver = r.versions.last_mut().ok_or_else(|| err("no version"))?;
                    let b = match which {
                        None => &mut ver.solutions,
                        Some(_) => {
                            &mut ver
                                .resources
                                .last_mut()
                                .ok_or_else(|| err("no cost block"))?
                                .1
                        }
                    };
                    match k {
                        "lb" => b.lb = v,
                        "ub" => b.ub = v,
                        "lb.order" => b.lb_order = v,
                        "ub.order" => b.ub_order = v,
                        _ => return Err(err(&format!("unknown key '{k}'"))),
                    }
                }
            }
        }
        if !matches!(block, Block::Top) {
            return Err(ReportError::Syntax(
                src.lines().count(),
                "unterminated block".into(),
            ));
        }
        Ok(r)
    }
}

/// Expected complexity orders, read from `lb: ...` / `ub: ...` lines.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Golden {
    pub lb: String,
    pub ub: String,
}

impl Golden {
    pub fn parse(src: &str) -> Result<Golden, ReportError> {
        let (mut lb, mut ub) = (None, None);
        for (n, line) in src.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line.split_once(':') {
                Some(("lb", v)) => lb = Some(v.trim().to_string()),
                Some(("ub", v)) => ub = Some(v.trim().to_string()),
                _ => {
                    return Err(ReportError::Syntax(
                        n + 1,
                        format!("expected 'lb:' or 'ub:', got '{line}'"),
                    ))
                }
            }
        }
        match (lb, ub) {
            (Some(lb), Some(ub)) => Ok(Golden { lb, ub }),
            _ => Err(ReportError::Syntax(
                src.lines().count(),
                "missing lb or ub line".into(),
            )),
        }
    }

    /// Whitespace-insensitive match of both orders.
    pub fn matches(&self, b: &Bounds) -> (bool, bool) {
        let strip = |s: &str| s.chars().filter(|c| !c.is_whitespace()).collect::<String>();
        (
            strip(&self.lb) == strip(&b.lb_order),
            strip(&self.ub) == strip(&b.ub_order),
        )
    }
}

impl VersionReport {
    /// Bounds of `steps`, or of the first resource when `steps` is absent.
    pub fn main_cost(&self) -> Option<&Bounds> {
        self.resources
            .iter()
            .find(|(n, _)| n == "steps")
            .or(self.resources.first())
            .map(|(_, b)| b)
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('\n', "\\n")
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut it = s.chars();
    while let Some(c) = it.next() {
        if c == '\\' {
            match it.next() {
                Some('n') => out.push('\n'),
                Some(o) => out.push(o),
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn escapes_survive() {
        for s in ["a\\b", "line\nbreak", "x = {y}", ""] {
            assert_eq!(unescape(&escape(s)), s);
        }
    }

    #[test]
    fn rejects_other_versions() {
        assert!(matches!(
            Report::parse_structured("resbound-report 9\n"),
            Err(ReportError::Header(_))
        ));
        assert!(matches!(
            Report::parse_structured("resbound-report 1\nversion a {\n"),
            Err(ReportError::Syntax(..))
        ));
    }
}
