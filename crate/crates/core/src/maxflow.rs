//! Boykov-Kolmogorov s-t max-flow / min-cut on a directed graph with real capacities.

use std::collections::VecDeque;

const NONE: usize = usize::MAX;
const TERMINAL: usize = usize::MAX - 1;
const ORPHAN: usize = usize::MAX - 2;
const INF_D: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Segment {
    Source,
    Sink,
}

#[derive(Debug, Clone)]
pub struct Graph {
    // per node
    first: Vec<usize>,
    tr_cap: Vec<f64>,
    parent: Vec<usize>,
    is_sink: Vec<bool>,
    ts: Vec<u64>,
    dist: Vec<u32>,
    active: Vec<bool>,
    // per arc; arcs 2k and 2k+1 are sisters
    head: Vec<usize>,
    next: Vec<usize>,
    r_cap: Vec<f64>,
    flow: f64,
    queue: VecDeque<usize>,
    orphans: VecDeque<usize>,
    time: u64,
}

impl Graph {
    pub fn new(nodes: usize) -> Self {
        Self {
            first: vec![NONE; nodes],
            tr_cap: vec![0.0; nodes],
            parent: vec![NONE; nodes],
            is_sink: vec![false; nodes],
            ts: vec![0; nodes],
            dist: vec![0; nodes],
            active: vec![false; nodes],
            head: Vec::new(),
            next: Vec::new(),
            r_cap: Vec::new(),
            flow: 0.0,
            queue: VecDeque::new(),
            orphans: VecDeque::new(),
            time: 0,
        }
    }

    pub fn with_capacity(nodes: usize, edges: usize) -> Self {
        let mut g = Self::new(nodes);
        g.head.reserve(2 * edges);
        g.next.reserve(2 * edges);
        g.r_cap.reserve(2 * edges);
        g
    }

    pub fn node_count(&self) -> usize {
        self.first.len()
    }

    /// Adds capacities from the source and to the sink. Negative values are not allowed.
    pub fn add_tweights(&mut self, i: usize, cap_source: f64, cap_sink: f64) {
        debug_assert!(cap_source >= 0.0 && cap_sink >= 0.0);
        let (mut cs, mut ck) = (cap_source, cap_sink);
        let delta = self.tr_cap[i];
        if delta > 0.0 {
            cs += delta;
        } else {
            ck -= delta;
        }
        self.flow += cs.min(ck);
        self.tr_cap[i] = cs - ck;
    }

    /// Adds `i -> j` with capacity `cap` and `j -> i` with capacity `rev_cap`.
    pub fn add_edge(&mut self, i: usize, j: usize, cap: f64, rev_cap: f64) {
        debug_assert!(i != j && cap >= 0.0 && rev_cap >= 0.0);
        let a = self.head.len();
        self.head.push(j);
        self.next.push(self.first[i]);
        self.r_cap.push(cap);
        self.first[i] = a;
        self.head.push(i);
        self.next.push(self.first[j]);
        self.r_cap.push(rev_cap);
        self.first[j] = a + 1;
    }

    #[inline]
    fn sister(a: usize) -> usize {
        a ^ 1
    }

    fn set_active(&mut self, i: usize) {
        if !self.active[i] {
            self.active[i] = true;
            self.queue.push_back(i);
        }
    }

    fn next_active(&mut self) -> Option<usize> {
        while let Some(i) = self.queue.pop_front() {
            self.active[i] = false;
            if self.parent[i] != NONE {
                return Some(i);
            }
        }
        None
    }

    fn arcs(&self, i: usize) -> ArcIter<'_> {
        ArcIter { next: &self.next, a: self.first[i] }
    }

    /// Runs to completion and returns the max-flow value.
    pub fn maxflow(&mut self) -> f64 {
        let n = self.node_count();
        self.queue.clear();
        self.orphans.clear();
        for i in 0..n {
            self.active[i] = false;
            self.ts[i] = 0;
            if self.tr_cap[i] > 0.0 {
                self.is_sink[i] = false;
                self.parent[i] = TERMINAL;
                self.dist[i] = 1;
                self.set_active(i);
            } else if self.tr_cap[i] < 0.0 {
                self.is_sink[i] = true;
                self.parent[i] = TERMINAL;
                self.dist[i] = 1;
                self.set_active(i);
            } else {
                self.parent[i] = NONE;
            }
        }
        self.time = 0;
        let mut current: Option<usize> = None;
        loop {
            let i = match current.take().filter(|&i| self.parent[i] != NONE) {
                Some(i) => i,
                None => match self.next_active() {
                    Some(i) => i,
                    None => break,
                },
            };
            let mut found = NONE;
            if !self.is_sink[i] {
                let mut a = self.first[i];
                while a != NONE {
                    if self.r_cap[a] > 0.0 {
                        let j = self.head[a];
                        if self.parent[j] == NONE {
                            self.is_sink[j] = false;
                            self.parent[j] = Self::sister(a);
                            self.ts[j] = self.ts[i];
                            self.dist[j] = self.dist[i] + 1;
                            self.set_active(j);
                        } else if self.is_sink[j] {
                            found = a;
                            break;
                        } else if self.ts[j] <= self.ts[i] && self.dist[j] > self.dist[i] {
                            self.parent[j] = Self::sister(a);
                            self.ts[j] = self.ts[i];
                            self.dist[j] = self.dist[i] + 1;
                        }
                    }
                    a = self.next[a];
                }
            } else {
                let mut a = self.first[i];
                while a != NONE {
                    if self.r_cap[Self::sister(a)] > 0.0 {
                        let j = self.head[a];
                        if self.parent[j] == NONE {
                            self.is_sink[j] = true;
                            self.parent[j] = Self::sister(a);
                            self.ts[j] = self.ts[i];
                            self.dist[j] = self.dist[i] + 1;
                            self.set_active(j);
                        } else if !self.is_sink[j] {
                            found = Self::sister(a);
                            break;
                        } else if self.ts[j] <= self.ts[i] && self.dist[j] > self.dist[i] {
                            self.parent[j] = Self::sister(a);
                            self.ts[j] = self.ts[i];
                            self.dist[j] = self.dist[i] + 1;
                        }
                    }
                    a = self.next[a];
                }
            }
            self.time += 1;
            if found != NONE {
                current = Some(i);
                self.augment(found);
                while let Some(o) = self.orphans.pop_front() {
                    if self.is_sink[o] {
                        self.process_sink_orphan(o);
                    } else {
                        self.process_source_orphan(o);
                    }
                }
            }
        }
        self.flow
    }

    fn make_orphan_front(&mut self, i: usize) {
        self.parent[i] = ORPHAN;
        self.orphans.push_front(i);
    }

    fn make_orphan_rear(&mut self, i: usize) {
        self.parent[i] = ORPHAN;
        self.orphans.push_back(i);
    }

    fn augment(&mut self, middle: usize) {
        let mut b = self.r_cap[middle];
        let mut i = self.head[Self::sister(middle)];
        loop {
            let a = self.parent[i];
            if a == TERMINAL {
                break;
            }
            b = b.min(self.r_cap[Self::sister(a)]);
            i = self.head[a];
        }
        b = b.min(self.tr_cap[i]);
        let mut i = self.head[middle];
        loop {
            let a = self.parent[i];
            if a == TERMINAL {
                break;
            }
            b = b.min(self.r_cap[a]);
            i = self.head[a];
        }
        b = b.min(-self.tr_cap[i]);

        self.r_cap[Self::sister(middle)] += b;
        self.r_cap[middle] -= b;
        let mut i = self.head[Self::sister(middle)];
        loop {
            let a = self.parent[i];
            if a == TERMINAL {
                break;
            }
            self.r_cap[a] += b;
            self.r_cap[Self::sister(a)] -= b;
            if self.r_cap[Self::sister(a)] <= 0.0 {
                self.r_cap[Self::sister(a)] = 0.0;
                self.make_orphan_front(i);
            }
            i = self.head[a];
        }
        self.tr_cap[i] -= b;
        if self.tr_cap[i] <= 0.0 {
            self.tr_cap[i] = 0.0;
            self.make_orphan_front(i);
        }
        let mut i = self.head[middle];
        loop {
            let a = self.parent[i];
            if a == TERMINAL {
                break;
            }
            self.r_cap[Self::sister(a)] += b;
            self.r_cap[a] -= b;
            if self.r_cap[a] <= 0.0 {
                self.r_cap[a] = 0.0;
                self.make_orphan_front(i);
            }
            i = self.head[a];
        }
        self.tr_cap[i] += b;
        if self.tr_cap[i] >= 0.0 {
            self.tr_cap[i] = 0.0;
            self.make_orphan_front(i);
        }
        self.flow += b;
    }

    /// Distance to the terminal along parent links, or `None` when the chain hits an orphan.
    fn origin_distance(&mut self, start: usize) -> Option<u32> {
        let mut j = start;
        let mut d = 0u32;
        loop {
            if self.ts[j] == self.time {
                d += self.dist[j];
                break;
            }
            let a = self.parent[j];
            d += 1;
            if a == TERMINAL {
                self.ts[j] = self.time;
                self.dist[j] = 1;
                break;
            }
            if a == ORPHAN {
                return None;
            }
            j = self.head[a];
        }
        let mut j = start;
        let mut dd = d;
        while self.ts[j] != self.time {
            self.ts[j] = self.time;
            self.dist[j] = dd;
            dd -= 1;
            j = self.head[self.parent[j]];
        }
        Some(d)
    }

    fn process_source_orphan(&mut self, i: usize) {
        self.process_orphan(i, false);
    }

    fn process_sink_orphan(&mut self, i: usize) {
        self.process_orphan(i, true);
    }

    fn process_orphan(&mut self, i: usize, sink: bool) {
        let mut d_min = INF_D;
        let mut a0_min = NONE;
        let arcs: Vec<usize> = self.arcs(i).collect();
        for &a0 in &arcs {
            // residual capacity towards i for the source tree, away from i for the sink tree
            let cap = if sink { self.r_cap[a0] } else { self.r_cap[Self::sister(a0)] };
            if cap <= 0.0 {
                continue;
            }
            let j = self.head[a0];
            if self.is_sink[j] != sink || self.parent[j] == NONE {
                continue;
            }
            if let Some(d) = self.origin_distance(j) {
                if d < d_min {
                    a0_min = a0;
                    d_min = d;
                }
            }
        }
        if a0_min != NONE {
            self.parent[i] = a0_min;
            self.ts[i] = self.time;
            self.dist[i] = d_min + 1;
            return;
        }
        for &a0 in &arcs {
            let j = self.head[a0];
            let a = self.parent[j];
            if self.is_sink[j] != sink || a == NONE {
                continue;
            }
            let cap = if sink { self.r_cap[a0] } else { self.r_cap[Self::sister(a0)] };
            if cap > 0.0 {
                self.set_active(j);
            }
            if a != TERMINAL && a != ORPHAN && self.head[a] == i {
                self.make_orphan_rear(j);
            }
        }
        self.parent[i] = NONE;
    }

    /// Nodes reachable from the source in the residual graph after `maxflow`:
    /// the smallest source side over all minimum cuts.
    pub fn reachable_from_source(&self) -> Vec<bool> {
        let n = self.node_count();
        let mut seen: Vec<bool> = (0..n).map(|i| self.tr_cap[i] > 0.0).collect();
        let mut stack: Vec<usize> = (0..n).filter(|&i| seen[i]).collect();
        while let Some(i) = stack.pop() {
            for a in self.arcs(i) {
                let j = self.head[a];
                if !seen[j] && self.r_cap[a] > 0.0 {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen
    }

    /// Side of the minimum cut; nodes in neither search tree report `Source`.
    pub fn segment(&self, i: usize) -> Segment {
        if self.parent[i] != NONE && self.is_sink[i] {
            Segment::Sink
        } else {
            Segment::Source
        }
    }
}

struct ArcIter<'a> {
    next: &'a [usize],
    a: usize,
}

impl Iterator for ArcIter<'_> {
    type Item = usize;
    fn next(&mut self) -> Option<usize> {
        if self.a == NONE {
            return None;
        }
        let a = self.a;
        self.a = self.next[a];
        Some(a)
    }
}
