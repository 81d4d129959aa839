//! PROMELA skeleton export for cross-checking a scenario with SPIN.
//!
//! The skeleton models one request from the scenario source toward its
//! destination. Discovery is not modelled: its outcome is baked in as
//! `RANK_i_j` constants, where `RANK_i_j` is node i's rank of node j.

use std::fmt::Write as _;

use crate::netmodel::{self, NetError, ScenarioConfig, SystemState, CHANNEL_CAPACITY};
use crate::saodv::{DuplicatePolicy, Mode};
use crate::NodeId;

use super::config::mode_name;

struct Emitter<'a> {
    cfg: &'a ScenarioConfig,
    post: SystemState,
    out: String,
}

macro_rules! line {
    ($e:expr) => { $e.out.push('\n') };
    ($e:expr, $($arg:tt)*) => {{
        let _ = write!($e.out, $($arg)*);
        $e.out.push('\n');
    }};
}

impl Emitter<'_> {
    fn nodes(&self) -> impl Iterator<Item = NodeId> {
        self.cfg.topology.nodes()
    }

    fn linked(&self, a: NodeId) -> Vec<NodeId> {
        self.nodes().filter(|&b| self.cfg.topology.is_connected(a, b)).collect()
    }

    fn eligible(&self, holder: NodeId, peer: NodeId) -> bool {
        let rank = self.post.nodes[holder.index()].rank_of(peer);
        match (rank, self.cfg.routing.mode) {
            (None, _) => false,
            (Some(_), Mode::Plain) => true,
            (Some(r), Mode::Sa) => self.cfg.routing.msl.admits(r),
        }
    }

    fn header(&mut self) {
        let topo = &self.cfg.topology;
        let routing = self.cfg.routing;
        line!(self, "/*");
        line!(self, " * RND + SA-AODV skeleton, {} nodes, source {}, dest {}.", topo.node_count(), topo.source, topo.dest);
        line!(self, " * mode {}, msl {}, rreq_dedup {}.", mode_name(routing.mode), routing.msl, match routing.duplicates {
            DuplicatePolicy::Improving => "improving",
            DuplicatePolicy::Strict => "strict",
        });
        line!(self, " * Generated by rndcheck export-promela; do not edit.");
        line!(self, " */");
        line!(self);
        line!(self, "#define N {}", topo.node_count());
        line!(self, "#define SOURCE {}", topo.source);
        line!(self, "#define DEST {}", topo.dest);
        line!(self, "#define MSL {}", routing.msl);
        line!(self, "#define NONE 255");
        line!(self, "#define HOP_OK(h) ((h) <= N - 1)");
        line!(self);
        line!(self, "mtype = {{ RREQ, RREP }};");
        line!(self);
    }

    fn ranks(&mut self) {
        line!(self, "/* ranks recorded by discovery; NONE = probe rejected */");
        for (a, b) in self.cfg.topology.connected_pairs() {
            let rank = self.post.nodes[a.index()].rank_of(b);
            let value = rank.map_or("NONE".to_string(), |r| r.value().to_string());
            if self.cfg.topology.is_tunnel(a, b) {
                line!(self, "#define RANK_{a}_{b} {value} /* wormhole tunnel */");
            } else {
                line!(self, "#define RANK_{a}_{b} {value}");
            }
        }
        line!(self);
        line!(self, "/* ELIG_i_j: node i may send to node j */");
        for (a, b) in self.cfg.topology.connected_pairs() {
            let flag = u8::from(self.eligible(a, b));
            line!(self, "#define ELIG_{a}_{b} {flag}");
        }
        line!(self);
    }

    fn globals(&mut self) {
        line!(self, "/* links as seen by the radios; a wormhole tunnel counts as a link */");
        line!(self, "typedef Row {{ bit col[N] }};");
        line!(self, "Row conn[N];");
        line!(self);
        line!(self, "/* route toward DEST and reverse route toward SOURCE, per node */");
        line!(self, "byte fwd_next[N];");
        line!(self, "byte fwd_hops[N];");
        line!(self, "byte fwd_seq[N];");
        line!(self, "byte rev_next[N];");
        line!(self, "byte rev_hops[N];");
        line!(self, "byte iv;");
        line!(self);
        line!(self, "/* fields: origin, dest, hop_count, dest_seq */");
        for (a, b) in self.cfg.topology.connected_pairs() {
            line!(self, "chan c_{a}_{b} = [{CHANNEL_CAPACITY}] of {{ mtype, byte, byte, byte, byte }};");
        }
        line!(self);
    }

    fn properties(&mut self) {
        line!(self, "/*");
        line!(self, " * P1 loop freedom:  ltl p1 {{ [] loop_free }}");
        line!(self, " * never {{    (negation: <> !loop_free)");
        line!(self, " * T0_init:");
        line!(self, " *     if");
        line!(self, " *     :: (!loop_free) -> goto accept_all");
        line!(self, " *     :: (1) -> goto T0_init");
        line!(self, " *     fi;");
        line!(self, " * accept_all:");
        line!(self, " *     skip");
        line!(self, " * }}");
        line!(self, " *");
        line!(self, " * P3 hop bound:  ltl p3 {{ [] (fwd_hops[SOURCE] == NONE || HOP_OK(fwd_hops[SOURCE])) }}");
        line!(self, " * never {{    (negation: <> !(fwd_hops[SOURCE] == NONE || HOP_OK(fwd_hops[SOURCE])))");
        line!(self, " * T0_init:");
        line!(self, " *     if");
        line!(self, " *     :: (fwd_hops[SOURCE] != NONE && !HOP_OK(fwd_hops[SOURCE])) -> goto accept_all");
        line!(self, " *     :: (1) -> goto T0_init");
        line!(self, " *     fi;");
        line!(self, " * accept_all:");
        line!(self, " *     skip");
        line!(self, " * }}");
        line!(self, " */");
        line!(self);
        line!(self, "/* follow next hops toward DEST from every node; N steps without arriving is a loop */");
        line!(self, "inline check_loop_free() {{");
        line!(self, "    v = 0;");
        line!(self, "    do");
        line!(self, "    :: v < N ->");
        line!(self, "        walk = v; steps = 0;");
        line!(self, "        do");
        line!(self, "        :: walk == DEST || walk == NONE -> break");
        line!(self, "        :: else -> assert(steps < N); walk = fwd_next[walk]; steps++");
        line!(self, "        od;");
        line!(self, "        v++");
        line!(self, "    :: else -> break");
        line!(self, "    od");
        line!(self, "}}");
        line!(self);
    }

    fn accept_guard(&self) -> &'static str {
        match self.cfg.routing.duplicates {
            DuplicatePolicy::Improving => "h + 1 < best",
            DuplicatePolicy::Strict => "best == NONE",
        }
    }

    fn process(&mut self, me: NodeId) {
        let topo = &self.cfg.topology;
        let (source, dest) = (topo.source, topo.dest);
        let peers = self.linked(me);
        line!(self, "proctype node_{me}() {{");
        line!(self, "    byte o, d, h, s;");
        line!(self, "    byte best = {};", if me == source { "0" } else { "NONE" });
        if me == dest {
            line!(self, "    byte seq = 0;");
        }
        line!(self, "    byte v, walk, steps;");
        if peers.is_empty() {
            line!(self, "    skip");
            line!(self, "}}");
            line!(self);
            return;
        }
        line!(self, "end:");
        line!(self, "    do");
        for &from in &peers {
            self.rreq_branch(me, from, &peers);
            self.rrep_branch(me, from, &peers);
        }
        line!(self, "    od");
        line!(self, "}}");
        line!(self);
    }

    fn trusted_guard(&self, me: NodeId, from: NodeId) -> String {
        match self.cfg.routing.mode {
            Mode::Sa => format!("RANK_{me}_{from} != NONE && RANK_{me}_{from} >= MSL"),
            Mode::Plain => format!("RANK_{me}_{from} != NONE"),
        }
    }

    fn rreq_branch(&mut self, me: NodeId, from: NodeId, peers: &[NodeId]) {
        let dest = self.cfg.topology.dest;
        let guard = self.trusted_guard(me, from);
        let accept = self.accept_guard();
        line!(self, "    :: atomic {{ c_{from}_{me}?RREQ(o, d, h, s) ->");
        line!(self, "        if");
        line!(self, "        :: ({guard}) && {accept} ->");
        line!(self, "            best = h + 1;");
        if me == dest {
            line!(self, "            seq++;");
            line!(self, "            c_{me}_{from}!RREP(o, d, 0, seq)");
        } else {
            line!(self, "            rev_next[{me}] = {from}; rev_hops[{me}] = h + 1;");
            line!(self, "            assert(HOP_OK(h + 1));");
            let targets: Vec<NodeId> = peers.iter().copied().filter(|&p| p != from).collect();
            if targets.is_empty() {
                line!(self, "            skip");
            }
            for (i, to) in targets.iter().enumerate() {
                let sep = if i + 1 < targets.len() { ";" } else { "" };
                line!(self, "            if :: ELIG_{me}_{to} -> c_{me}_{to}!RREQ(o, d, h + 1, s) :: else -> skip fi{sep}");
            }
        }
        line!(self, "        :: else -> skip");
        line!(self, "        fi }}");
    }

    fn rrep_branch(&mut self, me: NodeId, from: NodeId, peers: &[NodeId]) {
        let source = self.cfg.topology.source;
        let guard = match self.cfg.routing.mode {
            Mode::Sa => format!("RANK_{me}_{from} >= MSL"),
            Mode::Plain => "1".to_string(),
        };
        line!(self, "    :: atomic {{ c_{from}_{me}?RREP(o, d, h, s) ->");
        line!(self, "        if");
        line!(self, "        :: {guard} ->");
        line!(self, "            if");
        line!(self, "            :: fwd_next[{me}] == NONE || s > fwd_seq[{me}] || (s == fwd_seq[{me}] && h + 1 < fwd_hops[{me}]) ->");
        line!(self, "                fwd_next[{me}] = {from}; fwd_hops[{me}] = h + 1; fwd_seq[{me}] = s;");
        line!(self, "                assert(HOP_OK(h + 1));");
        line!(self, "                check_loop_free()");
        line!(self, "            :: else -> skip");
        line!(self, "            fi;");
        if me == source {
            line!(self, "            skip");
        } else {
            line!(self, "            if");
            for &to in peers {
                line!(self, "            :: rev_next[{me}] == {to} && ELIG_{me}_{to} -> c_{me}_{to}!RREP(o, d, h + 1, s)");
            }
            line!(self, "            :: else -> skip");
            line!(self, "            fi");
        }
        line!(self, "        :: else -> skip");
        line!(self, "        fi }}");
    }

    fn init(&mut self) {
        let topo = &self.cfg.topology;
        let source = topo.source;
        line!(self, "init {{");
        line!(self, "    atomic {{");
        for a in self.nodes().collect::<Vec<_>>() {
            for b in self.linked(a) {
                line!(self, "        conn[{a}].col[{b}] = 1;");
            }
        }
        line!(self, "        iv = 0;");
        line!(self, "        do");
        line!(self, "        :: iv < N -> fwd_next[iv] = NONE; fwd_hops[iv] = NONE; rev_next[iv] = NONE; rev_hops[iv] = NONE; iv++");
        line!(self, "        :: else -> break");
        line!(self, "        od;");
        for node in self.nodes().collect::<Vec<_>>() {
            line!(self, "        run node_{node}();");
        }
        let first: Vec<NodeId> = self.linked(source).into_iter().filter(|&b| self.eligible(source, b)).collect();
        line!(self, "        /* the source floods its request */");
        for b in first {
            line!(self, "        c_{source}_{b}!RREQ(SOURCE, DEST, 0, 0);");
        }
        line!(self, "        skip");
        line!(self, "    }}");
        line!(self, "}}");
    }
}

/// Renders the skeleton. Byte-stable for a given scenario.
pub fn export_promela(config: &ScenarioConfig) -> Result<String, NetError> {
    let post = netmodel::routing_start(config)?;
    let mut e = Emitter { cfg: config, post, out: String::new() };
    e.header();
    e.ranks();
    e.globals();
    e.properties();
    for node in e.nodes().collect::<Vec<_>>() {
        e.process(node);
    }
    e.init();
    Ok(e.out)
}
