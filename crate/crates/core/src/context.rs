//! Execution-context identifiers.
//!
//! Every thread has a current context id. The runner installs the id of the
//! test slot it is executing on; threads that never had one installed (for
//! example threads spawned by a test body) get a fresh id of their own on
//! first use.

use std::cell::Cell;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

thread_local! {
    static CURRENT: Cell<Option<ContextId>> = const { Cell::new(None) };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ContextId(u64);

impl ContextId {
    /// Allocates an id never handed out before in this process.
    pub fn fresh() -> Self {
        ContextId(NEXT_ID.fetch_add(1, Ordering::Relaxed))
    }

    /// Builds an id from a raw value. Ids built this way may collide with
    /// allocated ones; use only for tests and bindings.
    pub fn from_raw(raw: u64) -> Self {
        ContextId(raw)
    }

    pub fn raw(self) -> u64 {
        self.0
    }

    /// The context of the calling thread.
    pub fn current() -> Self {
        CURRENT.with(|c| match c.get() {
            Some(id) => id,
            None => {
                let id = ContextId::fresh();
                c.set(Some(id));
                id
            }
        })
    }

    /// Makes `self` the calling thread's context until the guard drops.
    pub fn enter(self) -> ContextGuard {
        let previous = CURRENT.with(|c| c.replace(Some(self)));
        ContextGuard { previous }
    }
}

impl fmt::Display for ContextId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ctx-{}", self.0)
    }
}

#[must_use = "the context is left as soon as the guard drops"]
pub struct ContextGuard {
    previous: Option<ContextId>,
}

impl Drop for ContextGuard {
    fn drop(&mut self) {
        CURRENT.with(|c| c.set(self.previous));
    }
}
