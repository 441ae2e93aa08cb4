//! One-producer, many-consumer telemetry fan-out. Each subscriber has a
//! bounded queue; when a slow subscriber falls behind, its oldest frames are
//! dropped so the producer never blocks.

use std::collections::VecDeque;
use std::sync::{Arc, Condvar, Mutex, Weak};
use std::time::Duration;

#[derive(Debug)]
struct Queue<T> {
    items: Mutex<(VecDeque<T>, u64)>,
    ready: Condvar,
    capacity: usize,
}

#[derive(Debug)]
pub struct TelemetryHub<T> {
    subscribers: Mutex<Vec<Weak<Queue<T>>>>,
    capacity: usize,
}

/// Receiving end of a subscription; unsubscribes on drop.
#[derive(Debug)]
pub struct Subscription<T> {
    queue: Arc<Queue<T>>,
}

impl<T: Clone> TelemetryHub<T> {
    pub fn new(capacity: usize) -> Self {
        Self {
            subscribers: Mutex::new(Vec::new()),
            capacity: capacity.max(1),
        }
    }

    pub fn subscribe(&self) -> Subscription<T> {
        let queue = Arc::new(Queue {
            items: Mutex::new((VecDeque::with_capacity(self.capacity), 0)),
            ready: Condvar::new(),
            capacity: self.capacity,
        });
        self.subscribers
            .lock()
            .expect("hub poisoned")
            .push(Arc::downgrade(&queue));
        Subscription { queue }
    }

    /// Delivers `item` to every live subscriber.
    pub fn publish(&self, item: T) {
        let mut subs = self.subscribers.lock().expect("hub poisoned");
        subs.retain(|w| w.strong_count() > 0);
        for q in subs.iter().filter_map(Weak::upgrade) {
            let mut guard = q.items.lock().expect("queue poisoned");
            if guard.0.len() == q.capacity {
                guard.0.pop_front();
                guard.1 += 1;
            }
            guard.0.push_back(item.clone());
            q.ready.notify_one();
        }
    }

    pub fn subscriber_count(&self) -> usize {
        let mut subs = self.subscribers.lock().expect("hub poisoned");
        subs.retain(|w| w.strong_count() > 0);
        subs.len()
    }
}

impl<T> Subscription<T> {
    pub fn try_recv(&self) -> Option<T> {
        self.queue.items.lock().expect("queue poisoned").0.pop_front()
    }

    /// Waits up to `timeout` for the next item.
    pub fn recv_timeout(&self, timeout: Duration) -> Option<T> {
        let guard = self.queue.items.lock().expect("queue poisoned");
        let (mut guard, _) = self
            .queue
            .ready
            .wait_timeout_while(guard, timeout, |g| g.0.is_empty())
            .expect("queue poisoned");
        guard.0.pop_front()
    }

    /// Frames dropped because this subscriber fell behind.
    pub fn dropped(&self) -> u64 {
        self.queue.items.lock().expect("queue poisoned").1
    }

    pub fn pending(&self) -> usize {
        self.queue.items.lock().expect("queue poisoned").0.len()
    }
}
