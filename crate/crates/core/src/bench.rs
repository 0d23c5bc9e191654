//! A line-oriented bench description language.
//!
//! ```text
//! # prepare the entangled output
//! source pair
//! block T idler
//! hwp 22.5deg signal
//! pcnot signal
//! analyzer1 30deg 0 signal
//! ```
//!
//! One statement per line (`;` may separate several on one line), `#` starts a
//! comment. Angles must carry a `deg` or `rad` suffix. The full grammar is in
//! `docs/bench-format.md`.

use std::fmt;

use thiserror::Error;

use crate::elements::{self, Element, ImperfectionSet, Photon};
use crate::pipeline::Pipeline;
use crate::state::{ket_from_label, Ket};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keyword {
    Source,
    Hwp,
    Pcnot,
    Mcnot,
    Attenuator,
    Block,
    Analyzer1,
    Analyzer2,
}

impl Keyword {
    pub const ALL: [Keyword; 8] = [
        Keyword::Source,
        Keyword::Hwp,
        Keyword::Pcnot,
        Keyword::Mcnot,
        Keyword::Attenuator,
        Keyword::Block,
        Keyword::Analyzer1,
        Keyword::Analyzer2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Keyword::Source => "source",
            Keyword::Hwp => "hwp",
            Keyword::Pcnot => "pcnot",
            Keyword::Mcnot => "mcnot",
            Keyword::Attenuator => "attenuator",
            Keyword::Block => "block",
            Keyword::Analyzer1 => "analyzer1",
            Keyword::Analyzer2 => "analyzer2",
        }
    }

    fn parse(word: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == word)
    }

    /// Positional argument slots; trailing `optional` slots may be omitted.
    fn signature(self) -> (&'static [Slot], usize) {
        use Slot::*;
        match self {
            Keyword::Source => (&[SourceKind, Label], 1),
            Keyword::Hwp => (&[Angle], 1),
            Keyword::Pcnot | Keyword::Mcnot => (&[], 0),
            Keyword::Attenuator => (&[Number, Number], 2),
            Keyword::Block => (&[Section], 1),
            Keyword::Analyzer1 => (&[Angle, Bit], 2),
            Keyword::Analyzer2 => (&[Angle, Angle, Number], 2),
        }
    }

    fn takes_photon(self) -> bool {
        self != Keyword::Source
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Angle,
    Number,
    Bit,
    Section,
    SourceKind,
    Label,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AngleUnit {
    Deg,
    Rad,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Angle {
    pub value: f64,
    pub unit: AngleUnit,
}

impl Angle {
    pub fn radians(self) -> f64 {
        match self.unit {
            AngleUnit::Deg => self.value.to_radians(),
            AngleUnit::Rad => self.value,
        }
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let unit = match self.unit {
            AngleUnit::Deg => "deg",
            AngleUnit::Rad => "rad",
        };
        write!(f, "{}{unit}", self.value)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Arg {
    Angle(Angle),
    Number(f64),
    /// Bare word: a momentum section, a bit, a source kind or a basis label.
    Word(String),
}

impl fmt::Display for Arg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arg::Angle(a) => a.fmt(f),
            Arg::Number(x) => write!(f, "{x}"),
            Arg::Word(w) => f.write_str(w),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statement {
    pub keyword: Keyword,
    pub args: Vec<Arg>,
    pub photon: Option<Photon>,
    /// 1-based source line.
    pub line: usize,
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword.as_str())?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        if let Some(p) = self.photon {
            write!(f, " {}", p.name())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchProgram {
    pub statements: Vec<Statement>,
}

impl fmt::Display for BenchProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.statements {
            writeln!(f, "{s}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchErrorKind {
    #[error("unknown keyword")]
    UnknownKeyword,
    #[error("`{keyword}` takes {expected} argument(s), found {found}")]
    Arity {
        keyword: &'static str,
        expected: String,
        found: usize,
    },
    #[error("not a number")]
    NotNumeric,
    #[error("angle needs a `deg` or `rad` suffix")]
    MissingUnit,
    #[error("expected {0}")]
    InvalidSymbol(&'static str),
    #[error("photon tag `idler` on a single-photon bench")]
    PhotonOnSingleBench,
    #[error("two-photon bench statement needs a `signal` or `idler` tag")]
    MissingPhoton,
    #[error("analyzer must be the last statement")]
    AnalyzerNotTerminal,
    #[error("`source` must be the first statement")]
    SourceNotFirst,
    #[error("invalid element: {0}")]
    Element(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {kind} (at `{token}`)")]
pub struct BenchError {
    pub line: usize,
    pub token: String,
    pub kind: BenchErrorKind,
}

impl BenchError {
    fn new(line: usize, token: impl Into<String>, kind: BenchErrorKind) -> Self {
        BenchError {
            line,
            token: token.into(),
            kind,
        }
    }
}

fn parse_number(line: usize, token: &str) -> Result<f64, BenchError> {
    match token.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(BenchError::new(line, token, BenchErrorKind::NotNumeric)),
    }
}

fn parse_angle(line: usize, token: &str) -> Result<Angle, BenchError> {
    let (digits, unit) = if let Some(d) = token.strip_suffix("deg") {
        (d, AngleUnit::Deg)
    } else if let Some(d) = token.strip_suffix("rad") {
        (d, AngleUnit::Rad)
    } else if token.parse::<f64>().is_ok() {
        return Err(BenchError::new(line, token, BenchErrorKind::MissingUnit));
    } else {
        return Err(BenchError::new(line, token, BenchErrorKind::NotNumeric));
    };
    Ok(Angle {
        value: parse_number(line, digits).map_err(|e| BenchError { token: token.into(), ..e })?,
        unit,
    })
}

fn parse_slot(line: usize, slot: Slot, token: &str) -> Result<Arg, BenchError> {
    let word = |ok: bool, expected| {
        if ok {
            Ok(Arg::Word(token.to_owned()))
        } else {
            Err(BenchError::new(line, token, BenchErrorKind::InvalidSymbol(expected)))
        }
    };
    match slot {
        Slot::Angle => parse_angle(line, token).map(Arg::Angle),
        Slot::Number => parse_number(line, token).map(Arg::Number),
        Slot::Bit => word(matches!(token, "0" | "1"), "momentum bit 0 or 1"),
        Slot::Section => word(matches!(token, "T" | "B"), "beam section T or B"),
        Slot::SourceKind => word(matches!(token, "pair" | "single"), "`pair` or `single`"),
        Slot::Label => word(ket_from_label(token).map_or(false, |k| k.dim() == 4), "a two-qubit basis label"),
    }
}

fn parse_statement(line: usize, text: &str) -> Result<Statement, BenchError> {
    let mut tokens: Vec<&str> = text.split_whitespace().collect();
    let head = tokens.remove(0);
    let keyword = Keyword::parse(head)
        .ok_or_else(|| BenchError::new(line, head, BenchErrorKind::UnknownKeyword))?;

    let photon = match tokens.last() {
        Some(&"signal") if keyword.takes_photon() => Some(Photon::Signal),
        Some(&"idler") if keyword.takes_photon() => Some(Photon::Idler),
        _ => None,
    };
    if photon.is_some() {
        tokens.pop();
    }

    let (slots, required) = keyword.signature();
    // `source pair` takes no label; `source single` requires one.
    let (slots, required) = match (keyword, tokens.first()) {
        (Keyword::Source, Some(&"pair")) => (&slots[..1], 1),
        (Keyword::Source, Some(&"single")) => (slots, 2),
        _ => (slots, required),
    };
    if tokens.len() < required || tokens.len() > slots.len() {
        let expected = if required == slots.len() {
            required.to_string()
        } else {
            format!("{required}..={}", slots.len())
        };
        return Err(BenchError::new(
            line,
            head,
            BenchErrorKind::Arity {
                keyword: keyword.as_str(),
                expected,
                found: tokens.len(),
            },
        ));
    }
    let args = tokens
        .iter()
        .zip(slots)
        .map(|(tok, &slot)| parse_slot(line, slot, tok))
        .collect::<Result<_, _>>()?;
    Ok(Statement {
        keyword,
        args,
        photon,
        line,
    })
}

/// Parses bench text into statements. Blank lines and `#` comments are skipped.
pub fn parse_bench(text: &str) -> Result<BenchProgram, BenchError> {
    let mut statements = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let code = raw.split('#').next().unwrap_or("");
        for part in code.split(';') {
            if part.trim().is_empty() {
                continue;
            }
            statements.push(parse_statement(idx + 1, part)?);
        }
    }
    Ok(BenchProgram { statements })
}

/// `(|0110⟩ + |0011⟩)/√2` in `|P_S M_S P_I M_I⟩` order.
pub fn down_converted_pair() -> Ket {
    let mut amps = vec![Default::default(); 16];
    amps[0b0110] = crate::state::c(1.0);
    amps[0b0011] = crate::state::c(1.0);
    Ket::new(amps).expect("nonzero")
}

fn angle_arg(s: &Statement, i: usize) -> f64 {
    match &s.args[i] {
        Arg::Angle(a) => a.radians(),
        other => unreachable!("parser admitted {other:?} as an angle"),
    }
}

fn number_arg(s: &Statement, i: usize) -> f64 {
    match &s.args[i] {
        Arg::Number(x) => *x,
        other => unreachable!("parser admitted {other:?} as a number"),
    }
}

fn word_arg(s: &Statement, i: usize) -> &str {
    match &s.args[i] {
        Arg::Word(w) => w,
        other => unreachable!("parser admitted {other:?} as a word"),
    }
}

/// Expands a P-CNOT into the gate and the imperfections of its interferometer.
pub fn pcnot_stage(imp: &ImperfectionSet) -> Result<Vec<Element>, crate::error::Error> {
    let mut out = vec![elements::pcnot()];
    if imp.routing_error_h != 0.0 || imp.routing_error_v != 0.0 {
        let mut e = elements::routing_error(imp.routing_error_h, imp.routing_error_v)?;
        e.label = "pcnot:routing".into();
        out.push(e);
    }
    if imp.plate_transmission_h != 1.0 || imp.plate_transmission_v != 1.0 {
        let mut e = elements::attenuator(imp.plate_transmission_h.sqrt(), imp.plate_transmission_v.sqrt())?;
        e.label = "pcnot:plate".into();
        out.push(e);
    }
    if imp.pbs_transmission_h != 1.0 {
        let mut e = elements::attenuator(imp.pbs_transmission_h.sqrt(), 1.0)?;
        e.label = "pcnot:pbs".into();
        out.push(e);
    }
    Ok(out)
}

fn element_error(s: &Statement) -> impl FnOnce(crate::error::Error) -> BenchError {
    let (line, token) = (s.line, s.to_string());
    move |e| BenchError::new(line, token, BenchErrorKind::Element(e.to_string()))
}

/// Resolves statements into a pipeline under the given imperfections.
pub fn compile_bench(prog: &BenchProgram, imp: &ImperfectionSet) -> Result<Pipeline, BenchError> {
    if let Err(e) = imp.validate() {
        return Err(BenchError::new(0, "imperfections", BenchErrorKind::Element(e.to_string())));
    }

    let mut statements = prog.statements.as_slice();
    let mut dimension = 4;
    let mut source = None;
    if let Some(first) = statements.first().filter(|s| s.keyword == Keyword::Source) {
        match word_arg(first, 0) {
            "pair" => {
                dimension = 16;
                source = Some(down_converted_pair());
            }
            _ => source = Some(ket_from_label(word_arg(first, 1)).map_err(element_error(first))?),
        }
        statements = &statements[1..];
    }

    let mut pipeline = Pipeline {
        dimension,
        source,
        elements: Vec::new(),
        analyzer: None,
    };
    for (i, s) in statements.iter().enumerate() {
        let token = || s.to_string();
        if s.keyword == Keyword::Source {
            return Err(BenchError::new(s.line, token(), BenchErrorKind::SourceNotFirst));
        }
        let photon = match (dimension, s.photon) {
            (4, Some(Photon::Idler)) => {
                return Err(BenchError::new(s.line, "idler", BenchErrorKind::PhotonOnSingleBench))
            }
            (4, _) => Photon::Signal,
            (_, Some(p)) => p,
            (_, None) => return Err(BenchError::new(s.line, token(), BenchErrorKind::MissingPhoton)),
        };
        let is_analyzer = matches!(s.keyword, Keyword::Analyzer1 | Keyword::Analyzer2);
        if is_analyzer && i + 1 != statements.len() {
            return Err(BenchError::new(s.line, token(), BenchErrorKind::AnalyzerNotTerminal));
        }

        let built: Vec<Element> = match s.keyword {
            Keyword::Source => unreachable!(),
            Keyword::Hwp => vec![elements::hwp(angle_arg(s, 0))],
            Keyword::Pcnot => pcnot_stage(imp).map_err(element_error(s))?,
            Keyword::Mcnot => vec![elements::mcnot()],
            Keyword::Attenuator => {
                vec![elements::attenuator(number_arg(s, 0), number_arg(s, 1)).map_err(element_error(s))?]
            }
            Keyword::Block => {
                let bit = usize::from(word_arg(s, 0) == "B");
                // beam_block places the element itself.
                pipeline
                    .elements
                    .push(elements::beam_block(bit, photon).map_err(element_error(s))?);
                continue;
            }
            Keyword::Analyzer1 => {
                let m = usize::from(word_arg(s, 1) == "1");
                vec![elements::analyzer_i(angle_arg(s, 0), m).map_err(element_error(s))?]
            }
            Keyword::Analyzer2 => {
                let delta = if s.args.len() > 2 { number_arg(s, 2) } else { 0.0 };
                vec![elements::analyzer_ii(angle_arg(s, 0), angle_arg(s, 1), imp, delta)
                    .map_err(element_error(s))?]
            }
        };
        let built = built.into_iter().map(|e| e.on_photon(photon));
        if is_analyzer {
            pipeline.analyzer = built.last();
        } else {
            pipeline.elements.extend(built);
        }
    }
    Ok(pipeline)
}

/// Parses and compiles in one step.
pub fn compile_text(text: &str, imp: &ImperfectionSet) -> Result<Pipeline, BenchError> {
    compile_bench(&parse_bench(text)?, imp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elements::ElementKind;
    use crate::state::{fidelity, State};

    #[test]
    fn grammar_example() {
        let prog = parse_bench("hwp 22.5deg signal\npcnot signal").unwrap();
        assert_eq!(prog.statements.len(), 2);
        assert_eq!(prog.statements[0].keyword, Keyword::Hwp);
        assert_eq!(prog.statements[1].line, 2);
        let prog = parse_bench("# comment\n\n  source pair ; block T idler # trailing\n").unwrap();
        assert_eq!(prog.statements.len(), 2);
        assert!(prog.statements.iter().all(|s| s.line == 3));
    }

    #[test]
    fn parse_errors_carry_line_and_token() {
        let e = parse_bench("pcnott signal").unwrap_err();
        assert_eq!((e.line, e.token.as_str(), &e.kind), (1, "pcnott", &BenchErrorKind::UnknownKeyword));

        let e = parse_bench("pcnot\nhwp signal").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(matches!(e.kind, BenchErrorKind::Arity { found: 0, .. }));

        let e = parse_bench("hwp 22.5 signal").unwrap_err();
        assert_eq!((e.token.as_str(), &e.kind), ("22.5", &BenchErrorKind::MissingUnit));

        let e = parse_bench("hwp abcdeg").unwrap_err();
        assert_eq!((e.token.as_str(), &e.kind), ("abcdeg", &BenchErrorKind::NotNumeric));

        let e = parse_bench("attenuator 1 x").unwrap_err();
        assert_eq!((e.token.as_str(), &e.kind), ("x", &BenchErrorKind::NotNumeric));

        let e = parse_bench("block X idler").unwrap_err();
        assert!(matches!(e.kind, BenchErrorKind::InvalidSymbol(_)));

        let e = parse_bench("analyzer1 0deg 2").unwrap_err();
        assert!(matches!(e.kind, BenchErrorKind::InvalidSymbol(_)));

        let e = parse_bench("source single").unwrap_err();
        assert!(matches!(e.kind, BenchErrorKind::Arity { .. }));

        let e = parse_bench("pcnot 3").unwrap_err();
        assert!(matches!(e.kind, BenchErrorKind::Arity { found: 1, .. }));
    }

    #[test]
    fn preparation_bench_yields_bell_state() {
        let p = compile_text(
            "source pair; block T idler; hwp 22.5deg signal; pcnot signal",
            &ImperfectionSet::ideal(),
        )
        .unwrap();
        let out = p.run().unwrap();
        assert!((out.success_probability - 0.5).abs() < 1e-15);
        // Signal in (|00⟩+|11⟩)/√2, idler left in |11⟩.
        let mut amps = vec![Default::default(); 16];
        amps[0b0011] = crate::state::c(1.0);
        amps[0b1111] = crate::state::c(1.0);
        let expected = Ket::new(amps).unwrap();
        let State::Pure(k) = &out.state else { panic!() };
        assert!((fidelity(&k.to_density(), &expected).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ideal_pcnot_is_a_single_cnot() {
        let p = compile_text("pcnot signal", &ImperfectionSet::ideal()).unwrap();
        assert_eq!(p.dimension, 4);
        assert_eq!(p.elements.len(), 1);
        assert_eq!(p.elements[0], elements::pcnot());
        let lossy = compile_text("pcnot", &ImperfectionSet::calibrated()).unwrap();
        assert!(lossy.elements.len() > 1);
        assert!(matches!(lossy.elements[0].kind, ElementKind::Unitary(_)));
    }

    #[test]
    fn compile_errors() {
        let ideal = ImperfectionSet::ideal();
        let e = compile_text("analyzer1 0deg 0; hwp 22.5deg signal", &ideal).unwrap_err();
        assert_eq!(e.kind, BenchErrorKind::AnalyzerNotTerminal);
        let e = compile_text("pcnot idler", &ideal).unwrap_err();
        assert_eq!(e.kind, BenchErrorKind::PhotonOnSingleBench);
        let e = compile_text("source pair\npcnot", &ideal).unwrap_err();
        assert_eq!((e.line, e.kind), (2, BenchErrorKind::MissingPhoton));
        let e = compile_text("pcnot\nsource pair", &ideal).unwrap_err();
        assert_eq!(e.kind, BenchErrorKind::SourceNotFirst);
        let e = compile_text("attenuator 1.5 1", &ideal).unwrap_err();
        assert!(matches!(e.kind, BenchErrorKind::Element(_)));
    }

    #[test]
    fn analyzer_is_terminal_detection() {
        let p = compile_text("source single 00\nhwp 22.5deg\npcnot\nanalyzer1 90deg 0", &ImperfectionSet::ideal())
            .unwrap();
        assert!(p.analyzer.is_some());
        let out = p.run().unwrap();
        assert!(out.detection_probability.unwrap() < 1e-15);
    }

    #[test]
    fn printing_round_trips() {
        let text = "source single HT\nhwp 0.1rad\nattenuator 0.9486832980505138 1\nanalyzer2 45deg 3.5rad 1e-5\n";
        let prog = parse_bench(text).unwrap();
        let again = parse_bench(&prog.to_string()).unwrap();
        assert_eq!(prog, again);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn angle() -> impl Strategy<Value = String> {
            (any::<f64>().prop_filter("finite", |x| x.is_finite()), prop::bool::ANY)
                .prop_map(|(v, deg)| format!("{v}{}", if deg { "deg" } else { "rad" }))
        }

        fn statement() -> impl Strategy<Value = String> {
            let photon = prop_oneof![Just(""), Just(" signal"), Just(" idler")];
            let body = prop_oneof![
                angle().prop_map(|a| format!("hwp {a}")),
                Just("pcnot".to_string()),
                Just("mcnot".to_string()),
                (0.0f64..=1.0, 0.0f64..=1.0).prop_map(|(a, b)| format!("attenuator {a} {b}")),
                prop_oneof![Just("T"), Just("B")].prop_map(|s| format!("block {s}")),
                (angle(), 0u8..2).prop_map(|(a, m)| format!("analyzer1 {a} {m}")),
                (angle(), angle(), prop::option::of(-1e-3f64..1e-3)).prop_map(|(a, b, d)| match d {
                    Some(d) => format!("analyzer2 {a} {b} {d}"),
                    None => format!("analyzer2 {a} {b}"),
                }),
            ];
            (body, photon).prop_map(|(b, p)| format!("{b}{p}"))
        }

        proptest! {
            #[test]
            fn parse_print_parse_is_stable(lines in proptest::collection::vec(statement(), 0..12)) {
                let text = lines.join("\n");
                let first = parse_bench(&text).unwrap();
                let printed = first.to_string();
                let second = parse_bench(&printed).unwrap();
                prop_assert_eq!(&first, &second);
                prop_assert_eq!(printed, second.to_string());
            }
        }
    }
}
