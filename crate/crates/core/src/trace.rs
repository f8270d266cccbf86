//! Instrumentation hook for the stream of classifier updates.

use crate::tree::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassifierKind {
    Regular,
    Auxiliary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UpdateEvent {
    /// Position of the example in the training sequence (across passes).
    pub example: usize,
    pub node: NodeId,
    pub kind: ClassifierKind,
    pub positive: bool,
}

pub trait UpdateObserver {
    fn on_update(&mut self, event: UpdateEvent);
}

impl UpdateObserver for () {
    #[inline]
    fn on_update(&mut self, _: UpdateEvent) {}
}

/// Records every update in order.
#[derive(Debug, Clone, Default)]
pub struct UpdateLog {
    pub events: Vec<UpdateEvent>,
}

impl UpdateObserver for UpdateLog {
    fn on_update(&mut self, event: UpdateEvent) {
        self.events.push(event);
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct UpdateCounter {
    pub regular: u64,
    pub auxiliary: u64,
}

impl UpdateCounter {
    pub fn total(&self) -> u64 {
        self.regular + self.auxiliary
    }
}

impl UpdateObserver for UpdateCounter {
    #[inline]
    fn on_update(&mut self, event: UpdateEvent) {
        match event.kind {
            ClassifierKind::Regular => self.regular += 1,
            ClassifierKind::Auxiliary => self.auxiliary += 1,
        }
    }
}

impl<T: UpdateObserver + ?Sized> UpdateObserver for &mut T {
    #[inline]
    fn on_update(&mut self, event: UpdateEvent) {
        (**self).on_update(event)
    }
}
