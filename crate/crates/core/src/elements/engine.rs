use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::elements::{CKind, CompiledModel, RunOptions};
use crate::error::{SimError, WaitEdge};
use crate::sim::{Action, Calendar, Entity, EntityId, EventId, RunResult, SimTime, StateTable, TraceRecord, Value};
use crate::stochastics::{derive_stream, Distribution, RandomStream};

#[derive(Debug, Clone, Copy)]
enum Payload {
    Arrive,
    CreateNext,
    TaskDone,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Loc {
    Transit,
    Task,
    File(usize),
    Valve,
    Buffer,
}

#[derive(Debug, Clone)]
struct Grant {
    entity: u64,
    resource: usize,
    suspended: bool,
}

/// Held by the preempting entity; releasing the resource resumes the server.
#[derive(Debug, Clone)]
struct Token {
    holder: u64,
    resource: usize,
    /// Grant whose server was taken, if the server was busy and the holder
    /// still has it.
    victim: Option<u64>,
}

#[derive(Debug, Clone)]
struct ActiveTask {
    element: usize,
    /// Work left, in days (calendar) or busy server-days (usage).
    remaining: f64,
    /// Work per day over the current segment.
    rate: f64,
    since: f64,
    event: Option<EventId>,
    valve: Option<usize>,
    usage: Option<usize>,
    background: bool,
}

#[derive(Debug, Clone)]
struct Waiter {
    entity: u64,
    element: usize,
    arrival: u64,
}

/// One replication in progress. Most callers use [`CompiledModel::run`];
/// this type also exposes stepping and state access.
pub struct Simulation<'m> {
    model: &'m CompiledModel,
    opts: RunOptions,
    cal: Calendar<Payload>,
    states: StateTable,
    streams: Vec<RandomStream>,
    entities: BTreeMap<u64, Entity>,
    loc: BTreeMap<u64, Loc>,
    next_entity: u64,
    created: u64,
    destroyed: u64,
    fg_live: u64,
    busy: Vec<u32>,
    preempted: Vec<u32>,
    busy_area: Vec<f64>,
    last_change: Vec<f64>,
    grants: BTreeMap<u64, Grant>,
    next_grant: u64,
    tokens: Vec<Token>,
    files: Vec<VecDeque<Waiter>>,
    next_arrival: u64,
    valve_queues: Vec<VecDeque<u64>>,
    buffers: Vec<Vec<u64>>,
    create_left: Vec<u64>,
    tasks: BTreeMap<u64, ActiveTask>,
    counters: Vec<u64>,
    events: u64,
    cur_seq: u64,
    end_time: f64,
    trace: Option<Vec<TraceRecord>>,
}

impl<'m> Simulation<'m> {
    pub fn new(model: &'m CompiledModel, seed: u64, opts: RunOptions) -> Result<Self, SimError> {
        let n_el = model.elements.len();
        let n_res = model.resources.len();
        let mut states = StateTable::default();
        for (name, v) in &model.states {
            states.declare(name, *v);
        }
        let mut sim = Simulation {
            model,
            opts,
            cal: Calendar::new(),
            states,
            streams: model
                .elements
                .iter()
                .map(|e| derive_stream(seed, &format!("elem.{}", e.id)))
                .collect(),
            entities: BTreeMap::new(),
            loc: BTreeMap::new(),
            next_entity: 1,
            created: 0,
            destroyed: 0,
            fg_live: 0,
            busy: vec![0; n_res],
            preempted: vec![0; n_res],
            busy_area: vec![0.0; n_res],
            last_change: vec![0.0; n_res],
            grants: BTreeMap::new(),
            next_grant: 0,
            tokens: Vec::new(),
            files: vec![VecDeque::new(); model.files.len()],
            next_arrival: 0,
            valve_queues: vec![VecDeque::new(); n_el],
            buffers: vec![Vec::new(); n_el],
            create_left: vec![0; n_el],
            tasks: BTreeMap::new(),
            counters: vec![0; model.tallies.len()],
            events: 0,
            cur_seq: 0,
            end_time: 0.0,
            trace: opts.trace.then(Vec::new),
        };
        for (i, e) in model.elements.iter().enumerate() {
            if let CKind::Create { count, daemon, .. } = e.kind {
                sim.create_left[i] = count;
                sim.cal.schedule(SimTime::ZERO, i, None, daemon, Payload::CreateNext)?;
            }
        }
        Ok(sim)
    }

    pub fn clock(&self) -> f64 {
        self.cal.clock().days()
    }

    pub fn get_state(&self, name: &str) -> Result<Value, SimError> {
        self.states.get(name)
    }

    /// Writes a state variable; valves bound to it open or close at once.
    pub fn set_state(&mut self, name: &str, value: Value) -> Result<(), SimError> {
        self.write_state(name, value, None)
    }

    /// Busy and preempted server counts of a resource.
    pub fn resource_level(&self, name: &str) -> Option<(u32, u32)> {
        let r = self.model.resources.iter().position(|x| x.0 == name)?;
        Some((self.busy[r], self.preempted[r]))
    }

    fn now(&self) -> f64 {
        self.cal.clock().days()
    }

    fn done(&self) -> bool {
        self.fg_live == 0 && self.cal.foreground_pending() == 0
    }

    /// Runs until no foreground work remains.
    pub fn run_to_end(&mut self) -> Result<RunResult, SimError> {
        while !self.done() {
            if self.cal.foreground_pending() == 0 && !self.revivable() {
                return Err(self.deadlock());
            }
            if !self.step()? {
                return Err(self.deadlock());
            }
        }
        Ok(self.result())
    }

    /// Fires the next event. Returns `false` when the calendar is empty.
    pub fn step(&mut self) -> Result<bool, SimError> {
        let Some(ev) = self.cal.advance() else {
            return Ok(false);
        };
        self.events += 1;
        if self.events > self.opts.event_ceiling {
            return Err(SimError::NonTermination {
                ceiling: self.opts.event_ceiling,
                clock: ev.fire_at.days(),
            });
        }
        self.cur_seq = ev.seq;
        self.end_time = ev.fire_at.days();
        let el = ev.target;
        match ev.payload {
            Payload::CreateNext => self.on_create(el)?,
            Payload::Arrive => {
                let e = ev.subject.expect("arrivals carry an entity").0;
                self.record(el, Some(e), Action::Enter, &[]);
                self.on_arrive(el, e)?;
            }
            Payload::TaskDone => {
                let e = ev.subject.expect("task completions carry an entity").0;
                self.tasks.remove(&e);
                self.send(e, el, 0)?;
            }
        }
        Ok(true)
    }

    fn result(&self) -> RunResult {
        let end = self.end_time;
        let utilization = self
            .model
            .resources
            .iter()
            .enumerate()
            .map(|(r, (name, total))| {
                let area = self.busy_area[r] + self.busy[r] as f64 * (end - self.last_change[r]);
                let u = if end > 0.0 { area / (*total as f64 * end) } else { 0.0 };
                (name.clone(), u.clamp(0.0, 1.0))
            })
            .collect();
        RunResult {
            end_time: end,
            events: self.events,
            counters: self
                .model
                .tallies
                .iter()
                .cloned()
                .zip(self.counters.iter().copied())
                .collect(),
            utilization,
            created: self.created,
            destroyed: self.destroyed,
            in_system: self.created - self.destroyed,
            trace: self.trace.clone(),
        }
    }

    fn record(&mut self, el: usize, entity: Option<u64>, action: Action, moved: &[(usize, u32)]) {
        let Some(trace) = self.trace.as_mut() else {
            return;
        };
        let resource_action = matches!(
            action,
            Action::Capture | Action::Release | Action::Preempt | Action::Resume
        );
        trace.push(TraceRecord {
            time: self.cal.clock().days(),
            seq: self.cur_seq,
            element: self.model.elements[el].id.clone(),
            entity: entity.map(EntityId),
            action,
            resources: moved
                .iter()
                .map(|&(r, n)| (self.model.resources[r].0.clone(), n))
                .collect(),
            levels: if resource_action {
                self.busy.iter().copied().zip(self.preempted.iter().copied()).collect()
            } else {
                Vec::new()
            },
        });
    }

    fn schedule(
        &mut self,
        dt: f64,
        target: usize,
        subject: Option<u64>,
        bg: bool,
        p: Payload,
    ) -> Result<EventId, SimError> {
        let at = SimTime::new(self.now() + dt).ok_or(SimError::PastTime {
            at: self.now() + dt,
            clock: self.now(),
        })?;
        self.cal.schedule(at, target, subject.map(EntityId), bg, p)
    }

    fn is_bg(&self, e: u64) -> bool {
        self.entities.get(&e).map(|x| x.background).unwrap_or(true)
    }

    fn send(&mut self, e: u64, from: usize, port: usize) -> Result<(), SimError> {
        let target = self.model.elements[from].out[port];
        if target == usize::MAX {
            return Err(SimError::InvalidModel(format!(
                "element `{}` has no link on port {port}",
                self.model.elements[from].id
            )));
        }
        self.loc.insert(e, Loc::Transit);
        let bg = self.is_bg(e);
        self.schedule(0.0, target, Some(e), bg, Payload::Arrive)?;
        Ok(())
    }

    fn new_entity(&mut self, background: bool) -> u64 {
        let id = self.next_entity;
        self.next_entity += 1;
        self.created += 1;
        if !background {
            self.fg_live += 1;
        }
        let created_at = self.cal.clock();
        self.entities
            .insert(id, Entity::new(EntityId(id), created_at, background));
        id
    }

    fn sample(&mut self, el: usize, d: &Distribution) -> Result<f64, SimError> {
        Ok(self.streams[el].sample(d)?)
    }

    fn on_create(&mut self, el: usize) -> Result<(), SimError> {
        let CKind::Create {
            ref interarrival,
            daemon,
            ..
        } = self.model.elements[el].kind
        else {
            unreachable!()
        };
        let e = self.new_entity(daemon);
        self.record(el, Some(e), Action::Create, &[]);
        self.send(e, el, 0)?;
        self.create_left[el] -= 1;
        if self.create_left[el] > 0 {
            let dt = self.sample(el, interarrival)?;
            if dt < 0.0 {
                return Err(SimError::NegativeDuration {
                    element: self.model.elements[el].id.clone(),
                    value: dt,
                });
            }
            self.schedule(dt, el, None, daemon, Payload::CreateNext)?;
        }
        Ok(())
    }

    fn on_arrive(&mut self, el: usize, e: u64) -> Result<(), SimError> {
        let model = self.model;
        let elem = &model.elements[el];
        match &elem.kind {
            CKind::Create { .. } => unreachable!("validated: creates take no input"),
            CKind::Task {
                duration, valve, usage, ..
            } => {
                let d = self.sample(el, duration)?;
                if d < 0.0 || !d.is_finite() {
                    return Err(SimError::NegativeDuration {
                        element: elem.id.clone(),
                        value: d,
                    });
                }
                let background = self.is_bg(e);
                self.tasks.insert(
                    e,
                    ActiveTask {
                        element: el,
                        remaining: d,
                        rate: 0.0,
                        since: self.now(),
                        event: None,
                        valve: *valve,
                        usage: *usage,
                        background,
                    },
                );
                self.loc.insert(e, Loc::Task);
                self.refresh_task(e)?;
            }
            CKind::Capture { requests, file } => {
                if self.files[*file].is_empty() && self.grantable(requests) {
                    self.grant(e, el)?;
                } else {
                    let arrival = self.next_arrival;
                    self.next_arrival += 1;
                    self.files[*file].push_back(Waiter {
                        entity: e,
                        element: el,
                        arrival,
                    });
                    self.loc.insert(e, Loc::File(*file));
                }
            }
            CKind::Release { releases } => {
                self.release(e, el, releases)?;
                self.send(e, el, 0)?;
            }
            CKind::Preempt { resource } => {
                self.preempt(e, el, *resource)?;
                self.send(e, el, 0)?;
            }
            CKind::Batch { size } => {
                self.buffers[el].push(e);
                self.loc.insert(e, Loc::Buffer);
                if self.buffers[el].len() >= *size {
                    let members = std::mem::take(&mut self.buffers[el]);
                    let mut contents = Vec::with_capacity(members.len());
                    for m in members {
                        self.loc.remove(&m);
                        contents.push(self.entities.remove(&m).expect("buffered entity is live"));
                    }
                    let bg = contents.iter().all(|c| c.background);
                    let c = self.new_entity(bg);
                    self.entities.get_mut(&c).expect("just created").contents = contents;
                    self.record(el, Some(c), Action::Batch, &[]);
                    self.send(c, el, 0)?;
                }
            }
            CKind::Unbatch => {
                let mut container = self.entities.remove(&e).expect("arriving entity is live");
                if container.contents.is_empty() {
                    return Err(SimError::UnbatchOfPlainEntity {
                        element: elem.id.clone(),
                        entity: e,
                    });
                }
                self.record(el, Some(e), Action::Unbatch, &[]);
                let contents = std::mem::take(&mut container.contents);
                for c in contents {
                    let id = c.id.0;
                    self.entities.insert(id, c);
                    self.send(id, el, 0)?;
                }
                self.dispose(el, container)?;
            }
            CKind::Generate { clones } => {
                self.send(e, el, 0)?;
                let (attrs, bg) = {
                    let ent = &self.entities[&e];
                    (ent.attributes.clone(), ent.background)
                };
                for _ in 0..*clones {
                    let c = self.new_entity(bg);
                    self.entities.get_mut(&c).expect("just created").attributes = attrs.clone();
                    self.record(el, Some(c), Action::Create, &[]);
                    self.send(c, el, 1)?;
                }
            }
            CKind::Consolidate { size } => {
                self.buffers[el].push(e);
                self.loc.insert(e, Loc::Buffer);
                if self.buffers[el].len() >= *size {
                    let members = std::mem::take(&mut self.buffers[el]);
                    let first = members[0];
                    self.record(el, Some(first), Action::Consolidate, &[]);
                    for &m in &members[1..] {
                        let ent = self.entities.remove(&m).expect("buffered entity is live");
                        self.dispose(el, ent)?;
                    }
                    self.send(first, el, 0)?;
                }
            }
            CKind::Conditional { predicate } => {
                let v = {
                    let ent = &self.entities[&e];
                    let states = &self.states;
                    predicate.eval(&|name: &str| {
                        ent.attributes
                            .get(name)
                            .copied()
                            .or_else(|| states.get(name).ok().map(Value::as_f64))
                    })
                }
                .map_err(|message| SimError::PredicateEval {
                    element: elem.id.clone(),
                    message,
                })?;
                self.record(el, Some(e), Action::Branch, &[]);
                self.send(e, el, if v != 0.0 { 0 } else { 1 })?;
            }
            CKind::Probabilistic { cumulative } => {
                let u = self.streams[el].next_unit();
                let port = cumulative.iter().position(|&c| u < c).unwrap_or(cumulative.len() - 1);
                self.record(el, Some(e), Action::Branch, &[]);
                self.send(e, el, port)?;
            }
            CKind::Valve { state } => {
                if self.states.get(state)?.truthy() {
                    self.send(e, el, 0)?;
                } else {
                    self.valve_queues[el].push_back(e);
                    self.loc.insert(e, Loc::Valve);
                }
            }
            CKind::Activator { valve, open } => {
                let CKind::Valve { state } = &model.elements[*valve].kind else {
                    return Err(SimError::UnknownValve(model.elements[*valve].id.clone()));
                };
                self.write_state(state, Value::Bool(*open), Some(el))?;
                self.send(e, el, 0)?;
            }
            CKind::Execute { formula } => {
                let v = {
                    let ent = &self.entities[&e];
                    let states = &self.states;
                    formula.expr.eval(&|name: &str| {
                        ent.attributes
                            .get(name)
                            .copied()
                            .or_else(|| states.get(name).ok().map(Value::as_f64))
                    })
                }
                .map_err(|message| SimError::PredicateEval {
                    element: elem.id.clone(),
                    message,
                })?;
                if self.states.contains(&formula.target) {
                    let value = match self.states.get(&formula.target)? {
                        Value::Bool(_) => Value::Bool(v != 0.0),
                        Value::Num(_) => Value::Num(v),
                    };
                    self.write_state(&formula.target, value, Some(el))?;
                } else {
                    self.entities
                        .get_mut(&e)
                        .expect("arriving entity is live")
                        .attributes
                        .insert(formula.target.clone(), v);
                }
                self.send(e, el, 0)?;
            }
            CKind::Counter { tally } => {
                self.counters[*tally] += 1;
                self.record(el, Some(e), Action::Count, &[]);
                self.send(e, el, 0)?;
            }
            CKind::Destroy => {
                let ent = self.entities.remove(&e).expect("arriving entity is live");
                self.dispose(el, ent)?;
            }
        }
        Ok(())
    }

    fn valve_open(&self, valve: usize) -> bool {
        match &self.model.elements[valve].kind {
            CKind::Valve { state } => self.states.get(state).map(Value::truthy).unwrap_or(true),
            _ => true,
        }
    }

    fn has_suspended(&self, e: u64) -> bool {
        self.grants.values().any(|g| g.entity == e && g.suspended)
    }

    /// Re-derives the progress rate of `e`'s active task and reschedules its
    /// completion if the rate changed.
    fn refresh_task(&mut self, e: u64) -> Result<(), SimError> {
        let Some(t) = self.tasks.get(&e) else {
            return Ok(());
        };
        let (valve, usage) = (t.valve, t.usage);
        let blocked = valve.is_some_and(|v| !self.valve_open(v)) || self.has_suspended(e);
        let rate = match (blocked, usage) {
            (true, _) => 0.0,
            (false, Some(r)) => self.busy[r] as f64,
            (false, None) => 1.0,
        };
        let now = self.now();
        let t = self.tasks.get_mut(&e).expect("checked above");
        t.remaining = (t.remaining - t.rate * (now - t.since)).max(0.0);
        t.since = now;
        if rate == t.rate && (t.event.is_some() || rate == 0.0) {
            return Ok(());
        }
        if let Some(id) = t.event.take() {
            self.cal.cancel(id);
        }
        t.rate = rate;
        if rate > 0.0 {
            let (dt, el, bg) = (t.remaining / rate, t.element, t.background);
            let id = self.schedule(dt, el, Some(e), bg, Payload::TaskDone)?;
            self.tasks.get_mut(&e).expect("still active").event = Some(id);
        }
        Ok(())
    }

    fn refresh_where(&mut self, pred: impl Fn(&ActiveTask) -> bool) -> Result<(), SimError> {
        let ids: Vec<u64> = self.tasks.iter().filter(|(_, t)| pred(t)).map(|(&e, _)| e).collect();
        for e in ids {
            self.refresh_task(e)?;
        }
        Ok(())
    }

    fn set_busy(&mut self, r: usize, busy: u32) {
        let now = self.now();
        self.busy_area[r] += self.busy[r] as f64 * (now - self.last_change[r]);
        self.last_change[r] = now;
        self.busy[r] = busy;
    }

    fn idle(&self, r: usize) -> u32 {
        self.model.resources[r].1 - self.busy[r] - self.preempted[r]
    }

    fn grantable(&self, requests: &[(usize, u32)]) -> bool {
        requests.iter().all(|&(r, n)| self.idle(r) >= n)
    }

    fn grant(&mut self, e: u64, el: usize) -> Result<(), SimError> {
        let model = self.model;
        let CKind::Capture { requests, .. } = &model.elements[el].kind else {
            unreachable!()
        };
        for &(r, n) in requests {
            for _ in 0..n {
                self.grants.insert(
                    self.next_grant,
                    Grant {
                        entity: e,
                        resource: r,
                        suspended: false,
                    },
                );
                self.next_grant += 1;
            }
            self.set_busy(r, self.busy[r] + n);
        }
        self.record(el, Some(e), Action::Capture, requests);
        for &(r, _) in requests {
            self.refresh_where(|t| t.usage == Some(r))?;
        }
        self.send(e, el, 0)
    }

    /// Grants file heads, oldest arrival first, until none fits.
    fn wake(&mut self) -> Result<(), SimError> {
        let model = self.model;
        loop {
            let mut best: Option<(u64, usize)> = None;
            for (f, q) in self.files.iter().enumerate() {
                let Some(h) = q.front() else { continue };
                let CKind::Capture { requests, .. } = &model.elements[h.element].kind else {
                    unreachable!()
                };
                if best.is_none_or(|(a, _)| h.arrival < a) && self.grantable(requests) {
                    best = Some((h.arrival, f));
                }
            }
            let Some((_, f)) = best else { return Ok(()) };
            let w = self.files[f].pop_front().expect("non-empty");
            self.grant(w.entity, w.element)?;
        }
    }

    fn resume_token(&mut self, tok: Token) -> Result<(), SimError> {
        let r = tok.resource;
        match tok.victim.and_then(|g| self.grants.get_mut(&g).map(|x| (g, x))) {
            Some((_, g)) if g.suspended => {
                g.suspended = false;
                let victim = g.entity;
                self.preempted[r] -= 1;
                self.set_busy(r, self.busy[r] + 1);
                self.refresh_task(victim)?;
            }
            _ => self.preempted[r] -= 1,
        }
        Ok(())
    }

    /// Gives up one grant; a suspended grant leaves its server preempted.
    fn drop_grant(&mut self, g: u64) {
        let grant = self.grants.remove(&g).expect("grant exists");
        if grant.suspended {
            for t in &mut self.tokens {
                if t.victim == Some(g) {
                    t.victim = None;
                }
            }
        } else {
            self.set_busy(grant.resource, self.busy[grant.resource] - 1);
        }
    }

    fn release(&mut self, e: u64, el: usize, releases: &[(usize, u32)]) -> Result<(), SimError> {
        for &(r, n) in releases {
            let held = self.tokens.iter().filter(|t| t.holder == e && t.resource == r).count()
                + self
                    .grants
                    .values()
                    .filter(|g| g.entity == e && g.resource == r)
                    .count();
            if (held as u64) < n as u64 {
                return Err(SimError::ReleaseWithoutHold {
                    element: self.model.elements[el].id.clone(),
                    entity: e,
                    resource: self.model.resources[r].0.clone(),
                    requested: n,
                    held: held as u32,
                });
            }
        }
        let mut resumed = Vec::new();
        let mut released = Vec::new();
        for &(r, n) in releases {
            let mut left = n;
            let mut k = 0;
            while left > 0 {
                let Some(pos) = self.tokens.iter().position(|t| t.holder == e && t.resource == r) else {
                    break;
                };
                let tok = self.tokens.remove(pos);
                self.resume_token(tok)?;
                left -= 1;
                k += 1;
            }
            if k > 0 {
                resumed.push((r, k));
            }
            let mut mine: Vec<(u64, bool)> = self
                .grants
                .iter()
                .filter(|(_, g)| g.entity == e && g.resource == r)
                .map(|(&id, g)| (id, !g.suspended))
                .collect();
            // Suspended grants first, then oldest.
            mine.sort_by_key(|&(id, active)| (active, id));
            let give = left as usize;
            for &(g, _) in mine.iter().take(give) {
                self.drop_grant(g);
            }
            if left > 0 {
                released.push((r, left));
            }
        }
        if !resumed.is_empty() {
            self.record(el, Some(e), Action::Resume, &resumed);
        }
        if !released.is_empty() {
            self.record(el, Some(e), Action::Release, &released);
        }
        self.refresh_task(e)?;
        for &(r, _) in releases {
            self.refresh_where(|t| t.usage == Some(r))?;
        }
        self.wake()
    }

    fn preempt(&mut self, e: u64, el: usize, r: usize) -> Result<(), SimError> {
        let victim = self
            .grants
            .iter()
            .find(|(_, g)| g.resource == r && !g.suspended)
            .map(|(&id, g)| (id, g.entity));
        match victim {
            Some((g, holder)) => {
                self.grants.get_mut(&g).expect("found").suspended = true;
                self.set_busy(r, self.busy[r] - 1);
                self.preempted[r] += 1;
                self.tokens.push(Token {
                    holder: e,
                    resource: r,
                    victim: Some(g),
                });
                self.record(el, Some(e), Action::Preempt, &[(r, 1)]);
                self.refresh_task(holder)?;
            }
            None if self.idle(r) > 0 => {
                self.preempted[r] += 1;
                self.tokens.push(Token {
                    holder: e,
                    resource: r,
                    victim: None,
                });
                self.record(el, Some(e), Action::Preempt, &[(r, 1)]);
            }
            None => return Err(SimError::AlreadyFullyPreempted(self.model.resources[r].0.clone())),
        }
        self.refresh_where(|t| t.usage == Some(r))
    }

    fn write_state(&mut self, name: &str, value: Value, by: Option<usize>) -> Result<(), SimError> {
        let old = self.states.get(name)?;
        self.states.set(name, value)?;
        if old.truthy() == value.truthy() {
            return Ok(());
        }
        let valves = self.model.state_valves.get(name).cloned().unwrap_or_default();
        for v in valves {
            self.valve_changed(v, value.truthy(), by)?;
        }
        Ok(())
    }

    fn valve_changed(&mut self, v: usize, open: bool, by: Option<usize>) -> Result<(), SimError> {
        let action = if open { Action::ValveOpen } else { Action::ValveClose };
        self.record(by.unwrap_or(v), None, action, &[]);
        if open {
            while let Some(e) = self.valve_queues[v].pop_front() {
                self.send(e, v, 0)?;
            }
        }
        self.refresh_where(|t| t.valve == Some(v))
    }

    /// Removes an entity for good, returning anything it still holds.
    fn dispose(&mut self, el: usize, ent: Entity) -> Result<(), SimError> {
        let e = ent.id.0;
        self.record(el, Some(e), Action::Destroy, &[]);
        let mut held: BTreeMap<usize, u32> = BTreeMap::new();
        for t in self.tokens.iter().filter(|t| t.holder == e) {
            *held.entry(t.resource).or_default() += 1;
        }
        for g in self.grants.values().filter(|g| g.entity == e) {
            *held.entry(g.resource).or_default() += 1;
        }
        if !held.is_empty() {
            let all: Vec<(usize, u32)> = held.into_iter().collect();
            self.release(e, el, &all)?;
        }
        if let Some(t) = self.tasks.remove(&e) {
            if let Some(id) = t.event {
                self.cal.cancel(id);
            }
        }
        self.loc.remove(&e);
        self.destroyed += 1;
        if !ent.background {
            self.fg_live -= 1;
        }
        for c in ent.contents {
            self.dispose(el, c)?;
        }
        Ok(())
    }

    /// Whether background activity could still unblock some foreground
    /// entity.
    fn revivable(&self) -> bool {
        let model = self.model;
        self.loc.iter().any(|(e, loc)| {
            if self.is_bg(*e) {
                return false;
            }
            match *loc {
                Loc::Task | Loc::Valve | Loc::Transit => true,
                Loc::File(f) => self.files[f].iter().any(|w| {
                    let CKind::Capture { requests, .. } = &model.elements[w.element].kind else {
                        return false;
                    };
                    requests.iter().any(|&(r, _)| {
                        self.preempted[r] > 0 || self.grants.values().any(|g| g.resource == r && self.is_bg(g.entity))
                    })
                }),
                Loc::Buffer => false,
            }
        })
    }

    fn deadlock(&self) -> SimError {
        let model = self.model;
        let mut waits = Vec::new();
        for q in &self.files {
            for w in q {
                let CKind::Capture { requests, .. } = &model.elements[w.element].kind else {
                    continue;
                };
                let r = requests
                    .iter()
                    .find(|&&(r, n)| self.idle(r) < n)
                    .map(|&(r, _)| r)
                    .unwrap_or(requests[0].0);
                let holders: BTreeSet<u64> = self
                    .grants
                    .values()
                    .filter(|g| g.resource == r)
                    .map(|g| g.entity)
                    .collect();
                waits.push(WaitEdge {
                    entity: w.entity,
                    element: model.elements[w.element].id.clone(),
                    resource: model.resources[r].0.clone(),
                    holders: holders.into_iter().collect(),
                });
            }
        }
        for (v, q) in self.valve_queues.iter().enumerate() {
            for &e in q {
                waits.push(WaitEdge {
                    entity: e,
                    element: model.elements[v].id.clone(),
                    resource: String::new(),
                    holders: Vec::new(),
                });
            }
        }
        for (b, q) in self.buffers.iter().enumerate() {
            for &e in q {
                waits.push(WaitEdge {
                    entity: e,
                    element: model.elements[b].id.clone(),
                    resource: String::new(),
                    holders: Vec::new(),
                });
            }
        }
        SimError::Deadlock {
            time: self.now(),
            waits,
        }
    }
}
