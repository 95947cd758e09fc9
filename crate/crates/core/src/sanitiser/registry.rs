use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use crate::context::ContextId;

use super::NetworkErrorKind;

/// Creation of one network error value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkErrorEvent {
    /// Registry-wide sequence number, increasing in recording order.
    pub seq: u64,
    pub kind: NetworkErrorKind,
    pub context: ContextId,
    pub at: Instant,
}

#[derive(Debug, Default)]
struct Inner {
    next_seq: u64,
    events: Vec<NetworkErrorEvent>,
    // Sequence number at which each context's current window opened.
    windows: HashMap<ContextId, u64>,
}

/// Shared record of network-error creations.
///
/// With context scoping on, a context only sees events created in that
/// context. With scoping off (the default) a context sees every event
/// recorded since its window opened, whatever context created it, so
/// errors raised on helper threads are still attributed to the running test.
#[derive(Debug, Default)]
pub struct EventRegistry {
    scoping: AtomicBool,
    inner: Mutex<Inner>,
}

impl EventRegistry {
    pub fn new(context_scoping: bool) -> Self {
        Self {
            scoping: AtomicBool::new(context_scoping),
            inner: Mutex::default(),
        }
    }

    pub fn context_scoping(&self) -> bool {
        self.scoping.load(Ordering::SeqCst)
    }

    pub fn set_context_scoping(&self, on: bool) {
        self.scoping.store(on, Ordering::SeqCst);
    }

    /// Records the creation of a network error in context `ctx` and returns
    /// the event's sequence number.
    pub fn record_creation(&self, kind: NetworkErrorKind, ctx: ContextId) -> u64 {
        let mut inner = self.inner.lock().expect("event registry poisoned");
        let seq = inner.next_seq;
        inner.next_seq += 1;
        inner.events.push(NetworkErrorEvent {
            seq,
            kind,
            context: ctx,
            at: Instant::now(),
        });
        seq
    }

    /// Drops the events of `ctx` and opens a new window for it.
    pub fn clear_window(&self, ctx: ContextId) {
        let mut inner = self.inner.lock().expect("event registry poisoned");
        inner.events.retain(|e| e.context != ctx);
        let start = inner.next_seq;
        inner.windows.insert(ctx, start);
    }

    /// Events visible to `ctx`, oldest first.
    pub fn events_for(&self, ctx: ContextId) -> Vec<NetworkErrorEvent> {
        let scoped = self.context_scoping();
        let inner = self.inner.lock().expect("event registry poisoned");
        let start = inner.windows.get(&ctx).copied().unwrap_or(0);
        inner
            .events
            .iter()
            .filter(|e| e.seq >= start && (!scoped || e.context == ctx))
            .cloned()
            .collect()
    }

    pub fn first_event(&self, ctx: ContextId) -> Option<NetworkErrorEvent> {
        self.events_for(ctx).into_iter().next()
    }

    pub fn has_event(&self, ctx: ContextId) -> bool {
        self.first_event(ctx).is_some()
    }

    /// Every stored event regardless of windows or scoping.
    pub fn all_events(&self) -> Vec<NetworkErrorEvent> {
        self.inner.lock().expect("event registry poisoned").events.clone()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("event registry poisoned").events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
