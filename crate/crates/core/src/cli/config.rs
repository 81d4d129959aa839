//! Scenario files.
//!
//! Line oriented, `#` starts a comment, one directive per line:
//!
//! ```text
//! nodes <n>              range <mm>             vlight <m/s>
//! delta_t <ps>           t_pkt <ps>             t_mac <ps>
//! msl <0..4>             mode <sa|plain>        skew_sign <paper|upper>
//! rreq_dedup <improving|strict>                 overflow_assert <on|off>
//! link <i> <j> <mm>      wormhole <i> <j> <mm>  source <i>   dest <j>
//! ```
//!
//! `link` is declared once per unordered pair. Every problem found is
//! reported; parsing never stops at the first one.

use std::fmt;
use std::fmt::Write as _;

use crate::netmodel::{ScenarioConfig, Topology, Wormhole, DEFAULT_MAX_DEPTH, MAX_NODES};
use crate::rnd::{SkewSign, TimingParams, SPEED_OF_LIGHT};
use crate::saodv::{DuplicatePolicy, Mode, MsLevel, RoutingPolicy};
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiagCode {
    Io,
    UnknownDirective,
    Arity,
    BadValue,
    DuplicateDirective,
    MissingDirective,
    NodeCount,
    NodeOutOfRange,
    SelfLink,
    ZeroDistance,
    LinkExceedsRange,
    DuplicateLink,
    AsymmetricLink,
    WormholeEndpoints,
    WormholeOverLink,
    SourceIsDest,
    Timing,
}

impl DiagCode {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagCode::Io => "io",
            DiagCode::UnknownDirective => "unknown-directive",
            DiagCode::Arity => "arity",
            DiagCode::BadValue => "bad-value",
            DiagCode::DuplicateDirective => "duplicate-directive",
            DiagCode::MissingDirective => "missing-directive",
            DiagCode::NodeCount => "node-count",
            DiagCode::NodeOutOfRange => "node-out-of-range",
            DiagCode::SelfLink => "self-link",
            DiagCode::ZeroDistance => "zero-distance",
            DiagCode::LinkExceedsRange => "link-exceeds-range",
            DiagCode::DuplicateLink => "duplicate-link",
            DiagCode::AsymmetricLink => "asymmetric-link",
            DiagCode::WormholeEndpoints => "wormhole-endpoints",
            DiagCode::WormholeOverLink => "wormhole-over-link",
            DiagCode::SourceIsDest => "source-is-dest",
            DiagCode::Timing => "timing",
        }
    }
}

/// One problem in a scenario file. Line 0 means the file as a whole.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub code: DiagCode,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "error[{}]: {}", self.code.as_str(), self.message)
        } else {
            write!(f, "line {}: error[{}]: {}", self.line, self.code.as_str(), self.message)
        }
    }
}

struct Slot<T> {
    name: &'static str,
    value: Option<(usize, T)>,
}

impl<T: Copy> Slot<T> {
    fn new(name: &'static str) -> Self {
        Slot { name, value: None }
    }

    fn set(&mut self, line: usize, value: T, diags: &mut Vec<Diagnostic>) {
        match self.value {
            Some((first, _)) => diags.push(Diagnostic {
                line,
                code: DiagCode::DuplicateDirective,
                message: format!("`{}` already given on line {first}", self.name),
            }),
            None => self.value = Some((line, value)),
        }
    }

    fn get(&self) -> Option<T> {
        self.value.map(|(_, v)| v)
    }

    fn line(&self) -> usize {
        self.value.map_or(0, |(l, _)| l)
    }

    fn required(&self, diags: &mut Vec<Diagnostic>) -> Option<T> {
        if self.value.is_none() {
            diags.push(Diagnostic {
                line: 0,
                code: DiagCode::MissingDirective,
                message: format!("missing required directive `{}`", self.name),
            });
        }
        self.get()
    }
}

#[derive(Clone, Copy)]
struct Edge {
    line: usize,
    a: u64,
    b: u64,
    mm: u64,
}

struct Raw {
    nodes: Slot<u64>,
    range: Slot<u64>,
    vlight: Slot<u64>,
    delta_t: Slot<u64>,
    t_pkt: Slot<u64>,
    t_mac: Slot<u64>,
    msl: Slot<u64>,
    mode: Slot<Mode>,
    skew: Slot<SkewSign>,
    dedup: Slot<DuplicatePolicy>,
    overflow: Slot<bool>,
    source: Slot<u64>,
    dest: Slot<u64>,
    wormhole: Slot<Edge>,
    links: Vec<Edge>,
}

fn diag(line: usize, code: DiagCode, message: impl Into<String>) -> Diagnostic {
    Diagnostic { line, code, message: message.into() }
}

fn int(line: usize, word: &str, what: &str, diags: &mut Vec<Diagnostic>) -> Option<u64> {
    match word.parse::<u64>() {
        Ok(v) => Some(v),
        Err(_) => {
            diags.push(diag(line, DiagCode::BadValue, format!("{what}: `{word}` is not a non-negative integer")));
            None
        }
    }
}

fn keyword<T: Copy>(
    line: usize,
    word: &str,
    what: &str,
    options: &[(&str, T)],
    diags: &mut Vec<Diagnostic>,
) -> Option<T> {
    let found = options.iter().find(|(k, _)| *k == word).map(|&(_, v)| v);
    if found.is_none() {
        let names: Vec<&str> = options.iter().map(|(k, _)| *k).collect();
        diags.push(diag(line, DiagCode::BadValue, format!("{what}: expected one of {}, got `{word}`", names.join("|"))));
    }
    found
}

/// Parses and validates a scenario.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let mut raw = Raw {
        nodes: Slot::new("nodes"),
        range: Slot::new("range"),
        vlight: Slot::new("vlight"),
        delta_t: Slot::new("delta_t"),
        t_pkt: Slot::new("t_pkt"),
        t_mac: Slot::new("t_mac"),
        msl: Slot::new("msl"),
        mode: Slot::new("mode"),
        skew: Slot::new("skew_sign"),
        dedup: Slot::new("rreq_dedup"),
        overflow: Slot::new("overflow_assert"),
        source: Slot::new("source"),
        dest: Slot::new("dest"),
        wormhole: Slot::new("wormhole"),
        links: Vec::new(),
    };

    for (i, full) in text.lines().enumerate() {
        let line = i + 1;
        let content = full.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let words: Vec<&str> = content.split_whitespace().collect();
        let (directive, args) = (words[0], &words[1..]);
        let arity = match directive {
            "link" | "wormhole" => 3,
            "nodes" | "range" | "vlight" | "delta_t" | "t_pkt" | "t_mac" | "msl" | "mode" | "skew_sign"
            | "rreq_dedup" | "overflow_assert" | "source" | "dest" => 1,
            other => {
                diags.push(diag(line, DiagCode::UnknownDirective, format!("unknown directive `{other}`")));
                continue;
            }
        };
        if args.len() != arity {
            diags.push(diag(
                line,
                DiagCode::Arity,
                format!("`{directive}` takes {arity} argument(s), got {}", args.len()),
            ));
            continue;
        }
        let d = &mut diags;
        match directive {
            "nodes" => int(line, args[0], "nodes", d).map(|v| raw.nodes.set(line, v, d)),
            "range" => int(line, args[0], "range", d).map(|v| raw.range.set(line, v, d)),
            "vlight" => int(line, args[0], "vlight", d).map(|v| raw.vlight.set(line, v, d)),
            "delta_t" => int(line, args[0], "delta_t", d).map(|v| raw.delta_t.set(line, v, d)),
            "t_pkt" => int(line, args[0], "t_pkt", d).map(|v| raw.t_pkt.set(line, v, d)),
            "t_mac" => int(line, args[0], "t_mac", d).map(|v| raw.t_mac.set(line, v, d)),
            "msl" => int(line, args[0], "msl", d).map(|v| raw.msl.set(line, v, d)),
            "source" => int(line, args[0], "source", d).map(|v| raw.source.set(line, v, d)),
            "dest" => int(line, args[0], "dest", d).map(|v| raw.dest.set(line, v, d)),
            "mode" => keyword(line, args[0], "mode", &[("sa", Mode::Sa), ("plain", Mode::Plain)], d)
                .map(|v| raw.mode.set(line, v, d)),
            "skew_sign" => keyword(
                line,
                args[0],
                "skew_sign",
                &[("paper", SkewSign::Paper), ("upper", SkewSign::UpperBound)],
                d,
            )
            .map(|v| raw.skew.set(line, v, d)),
            "rreq_dedup" => keyword(
                line,
                args[0],
                "rreq_dedup",
                &[("improving", DuplicatePolicy::Improving), ("strict", DuplicatePolicy::Strict)],
                d,
            )
            .map(|v| raw.dedup.set(line, v, d)),
            "overflow_assert" => keyword(line, args[0], "overflow_assert", &[("on", true), ("off", false)], d)
                .map(|v| raw.overflow.set(line, v, d)),
            "link" | "wormhole" => {
                let a = int(line, args[0], directive, d);
                let b = int(line, args[1], directive, d);
                let mm = int(line, args[2], directive, d);
                if let (Some(a), Some(b), Some(mm)) = (a, b, mm) {
                    let edge = Edge { line, a, b, mm };
                    if directive == "link" {
                        raw.links.push(edge);
                    } else {
                        raw.wormhole.set(line, edge, d);
                    }
                }
                Some(())
            }
            _ => unreachable!("directive list checked above"),
        };
    }

    let config = validate(&raw, &mut diags);
    match config {
        Some(cfg) if diags.is_empty() => Ok(cfg),
        _ => Err(diags),
    }
}

fn validate(raw: &Raw, diags: &mut Vec<Diagnostic>) -> Option<ScenarioConfig> {
    let n = raw.nodes.required(diags);
    let range = raw.range.required(diags);
    let t_pkt = raw.t_pkt.required(diags);
    let source = raw.source.required(diags);
    let dest = raw.dest.required(diags);

    let n = n.and_then(|n| {
        if (2..=MAX_NODES as u64).contains(&n) {
            Some(n)
        } else {
            diags.push(diag(raw.nodes.line(), DiagCode::NodeCount, format!("nodes must be 2..={MAX_NODES}, got {n}")));
            None
        }
    });

    let check_id = |id: u64, line: usize, what: &str, diags: &mut Vec<Diagnostic>| -> bool {
        match n {
            Some(n) if id >= n => {
                diags.push(diag(line, DiagCode::NodeOutOfRange, format!("{what} node {id} out of range 0..{n}")));
                false
            }
            _ => true,
        }
    };

    if let Some(s) = source {
        check_id(s, raw.source.line(), "source", diags);
    }
    if let Some(t) = dest {
        check_id(t, raw.dest.line(), "dest", diags);
    }
    if let (Some(s), Some(t)) = (source, dest) {
        if s == t {
            diags.push(diag(raw.dest.line(), DiagCode::SourceIsDest, format!("source and dest are both node {s}")));
        }
    }

    let msl = raw.msl.get().unwrap_or(1);
    if msl > 4 {
        diags.push(diag(raw.msl.line(), DiagCode::BadValue, format!("msl must be 0..=4 (a rank), got {msl}")));
    }
    for (slot, name) in [(&raw.delta_t, "delta_t"), (&raw.t_mac, "t_mac")] {
        if slot.get().is_some_and(|v| v > i64::MAX as u64) {
            diags.push(diag(slot.line(), DiagCode::BadValue, format!("{name} too large")));
        }
    }
    if t_pkt == Some(0) {
        diags.push(diag(raw.t_pkt.line(), DiagCode::Timing, "t_pkt must be > 0"));
    }
    if t_pkt.is_some_and(|v| v > i64::MAX as u64) {
        diags.push(diag(raw.t_pkt.line(), DiagCode::BadValue, "t_pkt too large"));
    }
    if raw.vlight.get() == Some(0) {
        diags.push(diag(raw.vlight.line(), DiagCode::Timing, "vlight must be > 0"));
    }
    if range == Some(0) {
        diags.push(diag(raw.range.line(), DiagCode::Timing, "range must be > 0"));
    }

    let mut seen: Vec<Edge> = Vec::new();
    let mut good_links = Vec::new();
    for &edge in &raw.links {
        let ok_a = check_id(edge.a, edge.line, "link", diags);
        let ok_b = check_id(edge.b, edge.line, "link", diags);
        if edge.a == edge.b {
            diags.push(diag(edge.line, DiagCode::SelfLink, format!("link from node {} to itself", edge.a)));
            continue;
        }
        if edge.mm == 0 {
            diags.push(diag(edge.line, DiagCode::ZeroDistance, "link distance must be > 0"));
            continue;
        }
        if let Some(r) = range {
            if edge.mm > r {
                diags.push(diag(
                    edge.line,
                    DiagCode::LinkExceedsRange,
                    format!("link {}-{} of {} mm exceeds range {r} mm", edge.a, edge.b, edge.mm),
                ));
            }
        }
        let same_pair = |e: &&Edge| (e.a, e.b) == (edge.a, edge.b) || (e.a, e.b) == (edge.b, edge.a);
        if let Some(prev) = seen.iter().find(same_pair) {
            if prev.mm == edge.mm {
                diags.push(diag(
                    edge.line,
                    DiagCode::DuplicateLink,
                    format!("link {}-{} already declared on line {}", edge.a, edge.b, prev.line),
                ));
            } else {
                diags.push(diag(
                    edge.line,
                    DiagCode::AsymmetricLink,
                    format!(
                        "link {}-{} is {} mm here but {} mm on line {}; the distance matrix must be symmetric",
                        edge.a, edge.b, edge.mm, prev.mm, prev.line
                    ),
                ));
            }
            continue;
        }
        seen.push(edge);
        if ok_a && ok_b {
            good_links.push(edge);
        }
    }

    let mut wormhole = None;
    if let Some(w) = raw.wormhole.get() {
        let ok = check_id(w.a, w.line, "wormhole", diags) & check_id(w.b, w.line, "wormhole", diags);
        if w.a == w.b {
            diags.push(diag(w.line, DiagCode::WormholeEndpoints, "wormhole endpoints must be distinct"));
        } else if seen.iter().any(|e| (e.a, e.b) == (w.a, w.b) || (e.a, e.b) == (w.b, w.a)) {
            diags.push(diag(
                w.line,
                DiagCode::WormholeOverLink,
                format!("wormhole endpoints {} and {} already share a genuine link", w.a, w.b),
            ));
        } else if w.mm == 0 {
            diags.push(diag(w.line, DiagCode::ZeroDistance, "tunnel distance must be > 0"));
        } else if ok {
            wormhole = Some(Wormhole { end_a: NodeId(w.a as u8), end_b: NodeId(w.b as u8), tunnel_mm: w.mm });
        }
    }

    if !diags.is_empty() {
        return None;
    }
    let (n, range, t_pkt, source, dest) = (n?, range?, t_pkt?, source?, dest?);
    let mut topology = Topology::new(n as usize, NodeId(source as u8), NodeId(dest as u8));
    for e in good_links {
        topology.set_link(NodeId(e.a as u8), NodeId(e.b as u8), e.mm);
    }
    topology.wormhole = wormhole;
    let params = TimingParams {
        clock_skew_ps: raw.delta_t.get().unwrap_or(0) as i64,
        mac_time_ps: raw.t_mac.get().unwrap_or(0) as i64,
        packet_time_ps: t_pkt as i64,
        light_speed: raw.vlight.get().unwrap_or(SPEED_OF_LIGHT),
        range_mm: range,
        skew_sign: raw.skew.get().unwrap_or_default(),
    };
    if let Err(e) = params.validate() {
        diags.push(diag(0, DiagCode::Timing, e.to_string()));
        return None;
    }
    Some(ScenarioConfig {
        topology,
        params,
        routing: RoutingPolicy {
            msl: MsLevel::new(msl as u8)?,
            mode: raw.mode.get().unwrap_or(Mode::Sa),
            duplicates: raw.dedup.get().unwrap_or_default(),
        },
        overflow_assert: raw.overflow.get().unwrap_or(false),
        max_depth: DEFAULT_MAX_DEPTH,
    })
}

/// Canonical text form; `parse_config(&render_config(c))` yields `c` up to
/// `max_depth`, which is not part of the file.
pub fn render_config(config: &ScenarioConfig) -> String {
    let topo = &config.topology;
    let p = &config.params;
    let mut out = String::new();
    let _ = writeln!(out, "nodes {}", topo.node_count());
    let _ = writeln!(out, "range {}", p.range_mm);
    let _ = writeln!(out, "vlight {}", p.light_speed);
    let _ = writeln!(out, "delta_t {}", p.clock_skew_ps);
    let _ = writeln!(out, "t_pkt {}", p.packet_time_ps);
    let _ = writeln!(out, "t_mac {}", p.mac_time_ps);
    let _ = writeln!(out, "msl {}", config.routing.msl);
    let _ = writeln!(out, "mode {}", mode_name(config.routing.mode));
    let _ = writeln!(
        out,
        "skew_sign {}",
        match p.skew_sign {
            SkewSign::Paper => "paper",
            SkewSign::UpperBound => "upper",
        }
    );
    let _ = writeln!(
        out,
        "rreq_dedup {}",
        match config.routing.duplicates {
            DuplicatePolicy::Improving => "improving",
            DuplicatePolicy::Strict => "strict",
        }
    );
    let _ = writeln!(out, "overflow_assert {}", if config.overflow_assert { "on" } else { "off" });
    let _ = writeln!(out, "source {}", topo.source);
    let _ = writeln!(out, "dest {}", topo.dest);
    for a in topo.nodes() {
        for b in topo.nodes().filter(|&b| b > a) {
            if let Some(mm) = topo.link_mm(a, b) {
                let _ = writeln!(out, "link {a} {b} {mm}");
            }
        }
    }
    if let Some(w) = topo.wormhole {
        let _ = writeln!(out, "wormhole {} {} {}", w.end_a, w.end_b, w.tunnel_mm);
    }
    out
}

pub fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Sa => "sa",
        Mode::Plain => "plain",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const CHAIN3: &str = "\
# three nodes in a line
nodes 3
range 100000
t_pkt 500000000
source 0
dest 2
link 0 1 40000
link 1 2 40000
";

    fn codes(text: &str) -> Vec<DiagCode> {
        parse_config(text).unwrap_err().into_iter().map(|d| d.code).collect()
    }

    #[test]
    fn chain_parses_with_defaults() {
        let cfg = parse_config(CHAIN3).unwrap();
        assert_eq!(cfg.topology.node_count(), 3);
        assert_eq!(cfg.topology.connected_pairs().len(), 4);
        assert_eq!(cfg.params.light_speed, SPEED_OF_LIGHT);
        assert_eq!(cfg.routing.msl.value(), 1);
        assert_eq!(cfg.routing.mode, Mode::Sa);
        assert_eq!(cfg.routing.duplicates, DuplicatePolicy::Improving);
    }

    #[test]
    fn asymmetric_link() {
        let text = format!("{CHAIN3}link 1 0 30000\n");
        assert_eq!(codes(&text), vec![DiagCode::AsymmetricLink]);
        let text = format!("{CHAIN3}link 1 0 40000\n");
        assert_eq!(codes(&text), vec![DiagCode::DuplicateLink]);
    }

    #[test]
    fn msl_out_of_rank_domain() {
        let text = format!("{CHAIN3}msl 7\n");
        let diags = parse_config(&text).unwrap_err();
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].code, DiagCode::BadValue);
        assert_eq!(diags[0].line, 9);
    }

    #[test]
    fn every_independent_error_is_reported() {
        let text = "\
nodes 3
nodes 4
range 100000
t_pkt 500000000
frobnicate 1
source 0
dest 0
link 0 9 1000
link 1 2 200000
link 2 2 5
mode fast
wormhole 0 1 5
link 0 1 10
";
        let got = codes(text);
        for expected in [
            DiagCode::DuplicateDirective,
            DiagCode::UnknownDirective,
            DiagCode::SourceIsDest,
            DiagCode::NodeOutOfRange,
            DiagCode::LinkExceedsRange,
            DiagCode::SelfLink,
            DiagCode::BadValue,
            DiagCode::WormholeOverLink,
        ] {
            assert!(got.contains(&expected), "missing {expected:?} in {got:?}");
        }
        assert!(got.len() >= 8);
    }

    #[test]
    fn missing_required() {
        let got = codes("nodes 2\n");
        assert_eq!(got.iter().filter(|&&c| c == DiagCode::MissingDirective).count(), 4);
    }

    #[test]
    fn bad_shapes() {
        assert_eq!(codes(&format!("{CHAIN3}link 0 1\n")), vec![DiagCode::Arity]);
        assert_eq!(codes(&format!("{CHAIN3}delta_t -5\n")), vec![DiagCode::BadValue]);
        assert_eq!(codes(&CHAIN3.replace("nodes 3", "nodes 9")), vec![DiagCode::NodeCount]);
        assert_eq!(codes(&format!("{CHAIN3}wormhole 2 2 5\n")), vec![DiagCode::WormholeEndpoints]);
        assert_eq!(codes(&CHAIN3.replace("t_pkt 500000000", "t_pkt 0")), vec![DiagCode::Timing]);
        assert_eq!(codes(&format!("{CHAIN3}link 0 2 0\n")), vec![DiagCode::ZeroDistance]);
    }

    #[test]
    fn diagnostics_render_with_line() {
        let d = parse_config(&format!("{CHAIN3}bogus\n")).unwrap_err();
        assert_eq!(d[0].to_string(), "line 9: error[unknown-directive]: unknown directive `bogus`");
    }

    fn arb_config() -> impl Strategy<Value = ScenarioConfig> {
        (2usize..=MAX_NODES)
            .prop_flat_map(|n| {
                let pairs = n * (n - 1) / 2;
                (
                    Just(n),
                    proptest::collection::vec(prop_oneof![Just(0u64), 1u64..=100_000], pairs),
                    0..n,
                    1..n,
                    (0u8..=4, any::<bool>(), any::<bool>(), any::<bool>(), any::<bool>()),
                    (0i64..1_000_000, 0i64..1_000_000, 1i64..1_000_000_000, 1u64..=SPEED_OF_LIGHT),
                    proptest::option::of((0..n, 0..n, 1u64..1_000_000)),
                )
            })
            .prop_map(|(n, dists, source, offset, flags, timing, worm)| {
                let dest = (source + offset) % n;
                let mut topo = Topology::new(n, NodeId(source as u8), NodeId(dest as u8));
                let mut k = 0;
                for a in 0..n {
                    for b in a + 1..n {
                        topo.set_link(NodeId(a as u8), NodeId(b as u8), dists[k]);
                        k += 1;
                    }
                }
                if let Some((a, b, mm)) = worm {
                    if a != b && topo.link_mm(NodeId(a as u8), NodeId(b as u8)).is_none() {
                        topo.wormhole =
                            Some(Wormhole { end_a: NodeId(a as u8), end_b: NodeId(b as u8), tunnel_mm: mm });
                    }
                }
                let (msl, plain, upper, strict, overflow) = flags;
                ScenarioConfig {
                    topology: topo,
                    params: TimingParams {
                        clock_skew_ps: timing.0,
                        mac_time_ps: timing.1,
                        packet_time_ps: timing.2,
                        light_speed: timing.3,
                        range_mm: 100_000,
                        skew_sign: if upper { SkewSign::UpperBound } else { SkewSign::Paper },
                    },
                    routing: RoutingPolicy {
                        msl: MsLevel::new(msl).unwrap(),
                        mode: if plain { Mode::Plain } else { Mode::Sa },
                        duplicates: if strict { DuplicatePolicy::Strict } else { DuplicatePolicy::Improving },
                    },
                    overflow_assert: overflow,
                    max_depth: DEFAULT_MAX_DEPTH,
                }
            })
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(cfg in arb_config()) {
            let text = render_config(&cfg);
            prop_assert_eq!(parse_config(&text), Ok(cfg));
        }
    }
}
