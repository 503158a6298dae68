//! Capacity-filling schedulers: earliest deadline, arrival order and
//! highest distortion impact first.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::model::{GopTemplate, ScheduleAction, UserState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimpleScheduler {
    Edf,
    Fifo,
    Hdf,
}

impl SimpleScheduler {
    pub fn name(self) -> &'static str {
        match self {
            SimpleScheduler::Edf => "edf",
            SimpleScheduler::Fifo => "fifo",
            SimpleScheduler::Hdf => "hdf",
        }
    }

    /// Context positions in service order.
    pub fn order(self, template: &GopTemplate, phase: u32) -> Vec<usize> {
        let ctx = template.context(phase as u64);
        let q = |p: usize| template.impact(phase, p);
        let rem = |p: usize| ctx.entries[p].remaining;
        let by_q = |a: usize, b: usize| q(b).partial_cmp(&q(a)).unwrap_or(Ordering::Equal);
        let mut v: Vec<usize> = (0..ctx.len()).collect();
        match self {
            SimpleScheduler::Edf => v.sort_by(|&a, &b| rem(a).cmp(&rem(b)).then(by_q(a, b)).then(a.cmp(&b))),
            // entries enter the window in deadline order; same-deadline
            // entries arrive in GOP order
            SimpleScheduler::Fifo => v.sort_by(|&a, &b| {
                rem(a)
                    .cmp(&rem(b))
                    .then(ctx.entries[a].du.cmp(&ctx.entries[b].du))
                    .then(a.cmp(&b))
            }),
            SimpleScheduler::Hdf => v.sort_by(|&a, &b| by_q(a, b).then(rem(a).cmp(&rem(b))).then(a.cmp(&b))),
        }
        v
    }

    /// Fills up to `capacity` packets in service order.
    pub fn schedule(self, template: &GopTemplate, state: &UserState, capacity: u32) -> ScheduleAction {
        let mut sends = vec![0u32; state.buffer.len()];
        let mut left = capacity;
        for p in self.order(template, state.phase) {
            let k = state.buffer[p].min(left);
            sends[p] = k;
            left -= k;
        }
        ScheduleAction::new(sends)
    }
}

pub fn edf_schedule(template: &GopTemplate, state: &UserState, capacity: u32) -> ScheduleAction {
    SimpleScheduler::Edf.schedule(template, state, capacity)
}

pub fn fifo_schedule(template: &GopTemplate, state: &UserState, capacity: u32) -> ScheduleAction {
    SimpleScheduler::Fifo.schedule(template, state, capacity)
}

pub fn hdf_schedule(template: &GopTemplate, state: &UserState, capacity: u32) -> ScheduleAction {
    SimpleScheduler::Hdf.schedule(template, state, capacity)
}
