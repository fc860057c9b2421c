use std::collections::VecDeque;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use idi_core::content::ContentStore;
use idi_core::IdiScene;

use crate::error::{ApiError, ApiResult};
use crate::stream::RunHandle;

pub const UNDO_DEPTH: usize = 50;
pub const DEFAULT_PORT: u16 = 7311;
pub const DEFAULT_FRAME_EVERY: u64 = 4;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub port: u16,
    /// Directory holding uploaded content and run outputs.
    pub work_dir: PathBuf,
    /// Where `POST /save` writes the scene, when set.
    pub scene_path: Option<PathBuf>,
    /// Physics steps per streamed frame.
    pub frame_every: u64,
}

impl ServiceConfig {
    pub fn new(work_dir: impl Into<PathBuf>) -> Self {
        Self { port: DEFAULT_PORT, work_dir: work_dir.into(), scene_path: None, frame_every: DEFAULT_FRAME_EVERY }
    }
}

/// A published scene version. Readers clone the `Arc` and never block writers.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub scene: Arc<IdiScene>,
    pub version: u64,
}

pub(crate) struct Writer {
    pub undo: VecDeque<Arc<IdiScene>>,
    pub store: Option<ContentStore>,
}

pub struct Session {
    pub config: ServiceConfig,
    snapshot: RwLock<Snapshot>,
    /// Mutations queue on this lock, so they apply in a total order.
    writer: tokio::sync::Mutex<Writer>,
    pub(crate) run: Mutex<Option<Arc<RunHandle>>>,
}

pub type AppState = Arc<Session>;

impl Session {
    pub fn new(config: ServiceConfig, scene: IdiScene) -> AppState {
        Arc::new(Self {
            config,
            snapshot: RwLock::new(Snapshot { scene: Arc::new(scene), version: 0 }),
            writer: tokio::sync::Mutex::new(Writer { undo: VecDeque::new(), store: None }),
            run: Mutex::new(None),
        })
    }

    pub fn snapshot(&self) -> Snapshot {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    fn publish(&self, scene: Arc<IdiScene>) -> u64 {
        let mut snap = self.snapshot.write().expect("snapshot lock");
        snap.scene = scene;
        snap.version += 1;
        snap.version
    }

    /// Applies `f` to a copy of the current scene on a blocking thread. On
    /// success the copy is published, the old scene goes on the undo stack
    /// and the new version is returned with `f`'s output. On error nothing
    /// changes.
    pub async fn mutate<T, F>(self: &Arc<Self>, f: F) -> ApiResult<(u64, T)>
    where
        T: Send + 'static,
        F: FnOnce(&mut IdiScene, &mut Option<ContentStore>) -> ApiResult<T> + Send + 'static,
    {
        let mut writer = self.writer.lock().await;
        let before = self.snapshot().scene;
        let mut store = writer.store.take();
        let work = before.clone();
        let joined = tokio::task::spawn_blocking(move || {
            let mut scene = (*work).clone();
            let out = f(&mut scene, &mut store);
            (scene, store, out)
        })
        .await;
        let (scene, store, out) = joined.map_err(|e| ApiError::internal(format!("mutation task failed: {e}")))?;
        writer.store = store;
        let out = out?;
        writer.undo.push_back(before);
        if writer.undo.len() > UNDO_DEPTH {
            writer.undo.pop_front();
        }
        Ok((self.publish(Arc::new(scene)), out))
    }

    /// Restores the scene from before the last mutation.
    pub async fn undo(&self) -> ApiResult<u64> {
        let mut writer = self.writer.lock().await;
        let prev =
            writer.undo.pop_back().ok_or_else(|| ApiError::bad_request("NothingToUndo", "undo stack is empty"))?;
        Ok(self.publish(prev))
    }
}

/// Opens the content store lazily so sessions that never upload stay read-only on disk.
pub(crate) fn store<'a>(slot: &'a mut Option<ContentStore>, config: &ServiceConfig) -> ApiResult<&'a mut ContentStore> {
    if slot.is_none() {
        *slot = Some(ContentStore::open(&config.work_dir)?);
    }
    Ok(slot.as_mut().expect("just opened"))
}
