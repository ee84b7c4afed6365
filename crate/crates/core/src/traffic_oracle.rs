//! Trace-driven single-level LRU cache simulator.
//!
//! Used as an independent check of the analytic traffic accounting in
//! [`crate::kernel_model`]: generate the access trace of a kernel archetype,
//! run it through the cache, and compare the resulting memory traffic with
//! the analytic per-iteration volumes.

use std::collections::HashMap;
use std::fmt::Write;
use std::hash::{BuildHasherDefault, Hasher};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kernel_model::Volumes;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Replacement {
    #[default]
    Lru,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheSimConfig {
    pub capacity_bytes: u64,
    pub line_bytes: u64,
    /// Ways per set; 0 means fully associative.
    pub associativity: u64,
    pub write_allocate: bool,
    pub replacement: Replacement,
}

impl Default for CacheSimConfig {
    fn default() -> Self {
        CacheSimConfig {
            capacity_bytes: 1 << 20,
            line_bytes: 64,
            associativity: 0,
            write_allocate: true,
            replacement: Replacement::Lru,
        }
    }
}

impl CacheSimConfig {
    pub fn fully_associative(capacity_bytes: u64, line_bytes: u64, write_allocate: bool) -> Self {
        CacheSimConfig {
            capacity_bytes,
            line_bytes,
            associativity: 0,
            write_allocate,
            replacement: Replacement::Lru,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.line_bytes.is_power_of_two() {
            return Err(Error::validation(
                "line_bytes",
                format!("{} is not a power of two", self.line_bytes),
            ));
        }
        if self.capacity_bytes == 0 || !self.capacity_bytes.is_multiple_of(self.line_bytes) {
            return Err(Error::validation(
                "capacity_bytes",
                format!(
                    "{} is not a positive multiple of the line size {}",
                    self.capacity_bytes, self.line_bytes
                ),
            ));
        }
        let lines = self.lines();
        if self.associativity > 0 && !lines.is_multiple_of(self.associativity) {
            return Err(Error::validation(
                "associativity",
                format!("{} ways do not divide {lines} lines", self.associativity),
            ));
        }
        if lines > u64::from(u32::MAX) {
            return Err(Error::validation("capacity_bytes", "too many lines"));
        }
        Ok(())
    }

    pub fn lines(&self) -> u64 {
        self.capacity_bytes / self.line_bytes
    }

    fn ways(&self) -> u64 {
        if self.associativity == 0 {
            self.lines()
        } else {
            self.associativity
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AccessKind {
    Load,
    Store,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Access {
    pub address: u64,
    pub size: u32,
    pub kind: AccessKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AccessTrace {
    pub events: Vec<Access>,
}

impl AccessTrace {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn push(&mut self, address: u64, size: u32, kind: AccessKind) {
        self.events.push(Access {
            address,
            size,
            kind,
        });
    }

    /// Parses the text trace format: one `L|S <hex-address> <size>` per line;
    /// blank lines and `#` comments are ignored.
    pub fn parse(source: &str) -> Result<Self> {
        let mut trace = AccessTrace::default();
        for (i, line) in source.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let syntax = |message: String| Error::Syntax {
                line: i + 1,
                message,
            };
            let mut parts = line.split_whitespace();
            let (Some(k), Some(a), Some(s), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(syntax(format!(
                    "expected `L|S <hex-address> <size>`, got `{line}`"
                )));
            };
            let kind = match k {
                "L" | "l" => AccessKind::Load,
                "S" | "s" => AccessKind::Store,
                other => return Err(syntax(format!("unknown access kind `{other}`"))),
            };
            let hex = a.trim_start_matches("0x").trim_start_matches("0X");
            let address = u64::from_str_radix(hex, 16)
                .map_err(|_| syntax(format!("bad hex address `{a}`")))?;
            let size: u32 = s
                .parse()
                .map_err(|_| syntax(format!("bad access size `{s}`")))?;
            if size == 0 {
                return Err(syntax("access size must be > 0".into()));
            }
            trace.push(address, size, kind);
        }
        Ok(trace)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.events.len() * 16);
        for e in &self.events {
            let k = match e.kind {
                AccessKind::Load => 'L',
                AccessKind::Store => 'S',
            };
            let _ = writeln!(out, "{k} {:#x} {}", e.address, e.size);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pattern {
    /// Sequential loads.
    Stream,
    /// Per element: 8 four-byte index loads, then 8 indirect element loads.
    Gather8,
    /// Sequential stores.
    StreamStore,
}

impl FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stream" => Ok(Pattern::Stream),
            "gather8" => Ok(Pattern::Gather8),
            "stream_store" | "stream-store" => Ok(Pattern::StreamStore),
            other => Err(Error::validation(
                "pattern",
                format!("expected stream|gather8|stream_store, found `{other}`"),
            )),
        }
    }
}

const INDEX_BYTES: u32 = 4;
const REGION_ALIGN: u64 = 4096;

/// Start of the gathered data array: after the index array, page aligned.
pub fn gather_data_base(n_elems: u64) -> u64 {
    (8 * n_elems * u64::from(INDEX_BYTES)).div_ceil(REGION_ALIGN) * REGION_ALIGN
}

pub fn generate_trace(
    pattern: Pattern,
    n_elems: u64,
    elem_bytes: u32,
    index_table: Option<&[u32]>,
) -> Result<AccessTrace> {
    if n_elems < 1 {
        return Err(Error::Contract("n_elems must be >= 1".into()));
    }
    if elem_bytes == 0 {
        return Err(Error::Contract("elem_bytes must be > 0".into()));
    }
    let eb = u64::from(elem_bytes);
    let mut trace = AccessTrace::default();
    match pattern {
        Pattern::Stream | Pattern::StreamStore => {
            let kind = if pattern == Pattern::Stream {
                AccessKind::Load
            } else {
                AccessKind::Store
            };
            trace.events.reserve(n_elems as usize);
            for i in 0..n_elems {
                trace.push(i * eb, elem_bytes, kind);
            }
        }
        Pattern::Gather8 => {
            let table = index_table
                .ok_or_else(|| Error::Contract("gather8 requires an index table".into()))?;
            if (table.len() as u64) < 8 * n_elems {
                return Err(Error::Contract(format!(
                    "gather8 index table has {} entries, need {}",
                    table.len(),
                    8 * n_elems
                )));
            }
            let data_base = gather_data_base(n_elems);
            trace.events.reserve(16 * n_elems as usize);
            for e in 0..n_elems {
                let first = 8 * e;
                for j in 0..8 {
                    trace.push(
                        (first + j) * u64::from(INDEX_BYTES),
                        INDEX_BYTES,
                        AccessKind::Load,
                    );
                }
                for j in 0..8 {
                    let node = u64::from(table[(first + j) as usize]);
                    trace.push(data_base + node * eb, elem_bytes, AccessKind::Load);
                }
            }
        }
    }
    Ok(trace)
}

/// Node list of a structured `edge^3` hexahedral mesh: 8 corner node
/// indices per element, nodes numbered on an `(edge+1)^3` grid.
pub fn hex_mesh_nodelist(edge: u32) -> Vec<u32> {
    let np = edge + 1;
    let node = |x: u32, y: u32, z: u32| (z * np + y) * np + x;
    let mut list = Vec::with_capacity(8 * (edge as usize).pow(3));
    for z in 0..edge {
        for y in 0..edge {
            for x in 0..edge {
                list.extend_from_slice(&[
                    node(x, y, z),
                    node(x + 1, y, z),
                    node(x + 1, y + 1, z),
                    node(x, y + 1, z),
                    node(x, y, z + 1),
                    node(x + 1, y, z + 1),
                    node(x + 1, y + 1, z + 1),
                    node(x, y + 1, z + 1),
                ]);
            }
        }
    }
    list
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrafficResult {
    pub mem_load_bytes: u64,
    pub mem_store_bytes: u64,
    /// Events whose lines were all resident.
    pub hits: u64,
    pub misses: u64,
    /// Dirty lines evicted during the run.
    pub writebacks: u64,
    /// Dirty lines written at the end of the trace.
    pub flushed: u64,
    /// Lines fetched for loads.
    pub load_fills: u64,
    /// Lines fetched for stores under write-allocate.
    pub store_fills: u64,
    /// Lines written straight to memory by non-allocating stores. Stores
    /// into the most recently streamed line are merged with it and count
    /// as hits.
    pub streamed_stores: u64,
}

#[derive(Default)]
struct LineHasher(u64);

impl Hasher for LineHasher {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 = (self.0 ^ u64::from(*b)).wrapping_mul(0x0100_0000_01b3);
        }
    }

    fn write_u64(&mut self, v: u64) {
        self.0 = (v ^ (v >> 29)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        self.0 ^= self.0 >> 32;
    }
}

const NIL: u32 = u32::MAX;

struct Node {
    line: u64,
    dirty: bool,
    prev: u32,
    next: u32,
}

struct Set {
    head: u32,
    tail: u32,
    len: u64,
}

/// LRU cache state. Each set is a doubly linked recency list over a shared
/// node arena; a hash map locates resident lines.
struct Cache {
    cfg: CacheSimConfig,
    ways: u64,
    nodes: Vec<Node>,
    sets: Vec<Set>,
    resident: HashMap<u64, u32, BuildHasherDefault<LineHasher>>,
    /// Open write-combining line for non-allocating stores.
    combining: Option<u64>,
    stats: TrafficResult,
}

impl Cache {
    fn new(cfg: CacheSimConfig) -> Self {
        let ways = cfg.ways();
        let n_sets = cfg.lines() / ways;
        Cache {
            cfg,
            ways,
            nodes: Vec::new(),
            sets: (0..n_sets)
                .map(|_| Set {
                    head: NIL,
                    tail: NIL,
                    len: 0,
                })
                .collect(),
            resident: HashMap::default(),
            combining: None,
            stats: TrafficResult::default(),
        }
    }

    fn set_of(&self, line: u64) -> usize {
        (line % self.sets.len() as u64) as usize
    }

    fn unlink(&mut self, set: usize, n: u32) {
        let (prev, next) = {
            let node = &self.nodes[n as usize];
            (node.prev, node.next)
        };
        if prev == NIL {
            self.sets[set].head = next;
        } else {
            self.nodes[prev as usize].next = next;
        }
        if next == NIL {
            self.sets[set].tail = prev;
        } else {
            self.nodes[next as usize].prev = prev;
        }
    }

    fn push_front(&mut self, set: usize, n: u32) {
        let head = self.sets[set].head;
        {
            let node = &mut self.nodes[n as usize];
            node.prev = NIL;
            node.next = head;
        }
        if head == NIL {
            self.sets[set].tail = n;
        } else {
            self.nodes[head as usize].prev = n;
        }
        self.sets[set].head = n;
    }

    /// Inserts a missing line, evicting the set's LRU line when full.
    fn insert(&mut self, line: u64, dirty: bool) {
        let set = self.set_of(line);
        let n = if self.sets[set].len < self.ways {
            self.sets[set].len += 1;
            self.nodes.push(Node {
                line,
                dirty,
                prev: NIL,
                next: NIL,
            });
            (self.nodes.len() - 1) as u32
        } else {
            let victim = self.sets[set].tail;
            self.unlink(set, victim);
            let old = &mut self.nodes[victim as usize];
            if old.dirty {
                self.stats.writebacks += 1;
            }
            self.resident.remove(&old.line);
            old.line = line;
            old.dirty = dirty;
            victim
        };
        self.resident.insert(line, n);
        self.push_front(set, n);
    }

    /// Returns true on a hit.
    fn touch(&mut self, line: u64, kind: AccessKind) -> bool {
        if let Some(&n) = self.resident.get(&line) {
            let set = self.set_of(line);
            if self.sets[set].head != n {
                self.unlink(set, n);
                self.push_front(set, n);
            }
            if kind == AccessKind::Store {
                self.nodes[n as usize].dirty = true;
            }
            return true;
        }
        match kind {
            AccessKind::Load => {
                self.stats.load_fills += 1;
                self.insert(line, false);
            }
            AccessKind::Store if self.cfg.write_allocate => {
                self.stats.store_fills += 1;
                self.insert(line, true);
            }
            AccessKind::Store => {
                // consecutive stores into the open combining line merge
                if self.combining == Some(line) {
                    return true;
                }
                self.combining = Some(line);
                self.stats.streamed_stores += 1;
            }
        }
        false
    }

    fn access(&mut self, a: &Access) {
        let lb = self.cfg.line_bytes;
        let first = a.address / lb;
        let last = (a.address + u64::from(a.size.max(1)) - 1) / lb;
        let mut all_hit = true;
        for line in first..=last {
            all_hit &= self.touch(line, a.kind);
        }
        if all_hit {
            self.stats.hits += 1;
        } else {
            self.stats.misses += 1;
        }
    }

    fn finish(mut self) -> TrafficResult {
        self.stats.flushed = self
            .resident
            .values()
            .filter(|&&n| self.nodes[n as usize].dirty)
            .count() as u64;
        let lb = self.cfg.line_bytes;
        let s = &mut self.stats;
        s.mem_load_bytes = (s.load_fills + s.store_fills) * lb;
        s.mem_store_bytes = (s.writebacks + s.flushed + s.streamed_stores) * lb;
        self.stats
    }
}

/// Runs `trace` through a cold cache and returns the memory traffic,
/// counting dirty lines still resident at the end as written back.
pub fn simulate_cache(trace: &AccessTrace, cfg: &CacheSimConfig) -> Result<TrafficResult> {
    cfg.validate()?;
    let mut cache = Cache::new(*cfg);
    for a in &trace.events {
        cache.access(a);
    }
    Ok(cache.finish())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficComparison {
    /// `None` when the analytic load volume is zero and so is the simulated one.
    pub rel_err_load: Option<f64>,
    pub rel_err_store: Option<f64>,
}

/// Relative error of simulated totals against `analytic * n_iters`.
///
/// A side with zero analytic volume has no relative error; it is reported
/// as `None` if the simulation agrees (also zero) and is a domain error
/// otherwise.
pub fn compare_to_analytic(
    sim: &TrafficResult,
    analytic: Volumes,
    n_iters: u64,
) -> Result<TrafficComparison> {
    if n_iters < 1 {
        return Err(Error::Domain("n_iters must be >= 1".into()));
    }
    if analytic.total() == 0 {
        return Err(Error::Domain("analytic traffic volume is zero".into()));
    }
    let side = |what: &str, simulated: u64, per_iter: u64| -> Result<Option<f64>> {
        let expected = per_iter as f64 * n_iters as f64;
        if per_iter == 0 {
            return if simulated == 0 {
                Ok(None)
            } else {
                Err(Error::Domain(format!(
                    "analytic {what} volume is zero but simulation moved {simulated} bytes"
                )))
            };
        }
        Ok(Some((simulated as f64 - expected).abs() / expected))
    };
    Ok(TrafficComparison {
        rel_err_load: side("load", sim.mem_load_bytes, analytic.load_bytes)?,
        rel_err_store: side("store", sim.mem_store_bytes, analytic.store_bytes)?,
    })
}

impl TrafficResult {
    pub fn to_key_value(&self) -> String {
        format!(
            "mem_load_bytes = {}\nmem_store_bytes = {}\nhits = {}\nmisses = {}\nwritebacks = {}\n\
             flushed = {}\nload_fills = {}\nstore_fills = {}\nstreamed_stores = {}\n",
            self.mem_load_bytes,
            self.mem_store_bytes,
            self.hits,
            self.misses,
            self.writebacks,
            self.flushed,
            self.load_fills,
            self.store_fills,
            self.streamed_stores
        )
    }
}
