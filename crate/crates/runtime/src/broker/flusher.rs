use std::sync::Arc;
use std::time::Duration;

use tokio::sync::{watch, Notify};
use tokio::time::Instant;

use sally_core::adm::SemanticStore;

/// Group-commit writer: after a mutation is signalled, waits out the rest
/// of `interval` since the previous flush, writes one snapshot covering
/// every mutation so far, and publishes the durable generation.
pub async fn run(
    store: Arc<SemanticStore>,
    dirty: Arc<Notify>,
    durable: watch::Sender<u64>,
    interval: Duration,
    mut stop: watch::Receiver<bool>,
) {
    let mut last = Instant::now().checked_sub(interval).unwrap_or_else(Instant::now);
    loop {
        tokio::select! {
            _ = dirty.notified() => {}
            _ = stop.changed() => break,
        }
        tokio::time::sleep_until(last + interval).await;
        flush_once(&store, &durable).await;
        last = Instant::now();
        if store.is_dirty() {
            // failed, or raced with new writes: go again next interval
            dirty.notify_one();
        }
    }
    flush_once(&store, &durable).await;
}

async fn flush_once(store: &Arc<SemanticStore>, durable: &watch::Sender<u64>) {
    let s = Arc::clone(store);
    match tokio::task::spawn_blocking(move || s.flush()).await {
        Ok(Ok(generation)) => {
            durable.send_if_modified(|g| {
                let moved = generation > *g;
                *g = (*g).max(generation);
                moved
            });
        }
        Ok(Err(e)) => tracing::error!(error = %e, "store flush failed"),
        Err(e) => tracing::error!(error = %e, "store flush task failed"),
    }
}
