//! Test collections: directory ingestion, item lookup and byte-range
//! resolution for media delivery.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, Read, Seek, SeekFrom};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use tracing::warn;
use walkdir::WalkDir;

use crate::ids::{CollectionId, ItemId};
use crate::model::{MediaCollection, MediaItem, MediaKind};

#[derive(Debug, Error)]
pub enum CollectionError {
    #[error("path {path} is not readable: {source}")]
    PathUnreadable {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("item name {name:?} appears at both {first} and {second}")]
    DuplicateItemName {
        name: String,
        first: String,
        second: String,
    },
    #[error("not found: {0}")]
    NotFound(String),
    #[error("unsatisfiable range for a {total}-byte file")]
    InvalidRange { total: u64 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn short_hash(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update([0u8]);
    }
    let digest = h.finalize();
    digest[..12].iter().map(|b| format!("{b:02x}")).collect()
}

/// Stable collection id derived from its name.
pub fn collection_id_for(name: &str) -> CollectionId {
    CollectionId(format!("col-{}", short_hash(&[name])))
}

/// Stable item id derived from the owning collection and relative path.
pub fn item_id_for(collection: &CollectionId, relative_path: &str) -> ItemId {
    ItemId(format!(
        "item-{}",
        short_hash(&[collection.as_str(), relative_path])
    ))
}

fn kind_for(path: &Path) -> Option<MediaKind> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    match ext.as_str() {
        "png" | "jpg" | "jpeg" => Some(MediaKind::Image),
        "mp4" | "webm" => Some(MediaKind::Video),
        _ => None,
    }
}

pub fn content_type_for(location: &str) -> &'static str {
    let ext = Path::new(location)
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase());
    match ext.as_deref() {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("mp4") => "video/mp4",
        Some("webm") => "video/webm",
        Some("ogg") => "audio/ogg",
        Some("mp3") => "audio/mpeg",
        Some("wav") => "audio/wav",
        _ => "application/octet-stream",
    }
}

/// Recursively registers every png/jpg/mp4/webm file below `path`.
///
/// Item names are file stems and must be unique within the collection. MP4
/// durations are read from the `mvhd` box; other videos get duration 0 and
/// the `duration_unknown` flag.
pub fn ingest_directory(
    path: &Path,
    collection_name: &str,
) -> Result<MediaCollection, CollectionError> {
    let unreadable = |source| CollectionError::PathUnreadable {
        path: path.to_path_buf(),
        source,
    };
    let meta = std::fs::metadata(path).map_err(unreadable)?;
    if !meta.is_dir() {
        return Err(unreadable(io::Error::new(
            io::ErrorKind::InvalidInput,
            "not a directory",
        )));
    }

    let id = collection_id_for(collection_name);
    let mut by_name: BTreeMap<String, MediaItem> = BTreeMap::new();
    for entry in WalkDir::new(path).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let source = e
                .into_io_error()
                .unwrap_or_else(|| io::Error::other("directory walk failed"));
            unreadable(source)
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let Some(kind) = kind_for(entry.path()) else {
            continue;
        };
        let Some(name) = entry.path().file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        if !MediaItem::is_valid_name(name) {
            warn!(path = %entry.path().display(), "skipping file with unsupported item name");
            continue;
        }
        let relative = entry
            .path()
            .strip_prefix(path)
            .unwrap_or(entry.path())
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");

        let (duration_ms, duration_unknown) = match kind {
            MediaKind::Image => (0, false),
            MediaKind::Video => match probe_mp4_duration(entry.path()) {
                Ok(Some(ms)) if ms > 0 => (ms, false),
                _ => {
                    warn!(path = %entry.path().display(), "could not determine video duration");
                    (0, true)
                }
            },
        };

        if let Some(existing) = by_name.get(name) {
            return Err(CollectionError::DuplicateItemName {
                name: name.to_owned(),
                first: existing.location.clone(),
                second: relative,
            });
        }
        by_name.insert(
            name.to_owned(),
            MediaItem {
                id: item_id_for(&id, &relative),
                collection_id: id.clone(),
                name: name.to_owned(),
                kind,
                duration_ms,
                location: relative,
                duration_unknown,
            },
        );
    }

    Ok(MediaCollection {
        id,
        name: collection_name.to_owned(),
        base_path: path.to_path_buf(),
        items: by_name.into_values().collect(),
    })
}

/// Reads the movie duration from an ISO-BMFF (`mp4`) file's `moov/mvhd` box.
/// Returns `Ok(None)` when the file carries no such box.
pub fn probe_mp4_duration(path: &Path) -> io::Result<Option<u64>> {
    let mut file = File::open(path)?;
    let len = file.metadata()?.len();
    let Some((moov_start, moov_end)) = find_box(&mut file, 0, len, b"moov")? else {
        return Ok(None);
    };
    let Some((mvhd_start, mvhd_end)) = find_box(&mut file, moov_start, moov_end, b"mvhd")? else {
        return Ok(None);
    };
    file.seek(SeekFrom::Start(mvhd_start))?;
    let mut body = vec![0u8; (mvhd_end - mvhd_start).min(128) as usize];
    file.read_exact(&mut body)?;
    let be32 = |b: &[u8]| u32::from_be_bytes([b[0], b[1], b[2], b[3]]) as u64;
    let be64 = |b: &[u8]| u64::from_be_bytes(b[..8].try_into().unwrap());
    let (timescale, duration) = match body.first() {
        Some(0) if body.len() >= 20 => (be32(&body[12..16]), be32(&body[16..20])),
        Some(1) if body.len() >= 32 => (be32(&body[20..24]), be64(&body[24..32])),
        _ => return Ok(None),
    };
    if timescale == 0 {
        return Ok(None);
    }
    Ok(Some(duration.saturating_mul(1000) / timescale))
}

/// Finds the first box of `kind` among the sibling boxes in `[start, end)`,
/// returning the byte span of its body.
fn find_box(
    file: &mut File,
    start: u64,
    end: u64,
    kind: &[u8; 4],
) -> io::Result<Option<(u64, u64)>> {
    let mut pos = start;
    while pos + 8 <= end {
        file.seek(SeekFrom::Start(pos))?;
        let mut header = [0u8; 8];
        file.read_exact(&mut header)?;
        let mut size = u32::from_be_bytes(header[..4].try_into().unwrap()) as u64;
        let mut header_len = 8;
        if size == 1 {
            let mut large = [0u8; 8];
            file.read_exact(&mut large)?;
            size = u64::from_be_bytes(large);
            header_len = 16;
        } else if size == 0 {
            size = end - pos;
        }
        if size < header_len || pos + size > end {
            return Ok(None);
        }
        if &header[4..8] == kind {
            return Ok(Some((pos + header_len, pos + size)));
        }
        pos += size;
    }
    Ok(None)
}

/// All known collections, keyed by id.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CollectionRegistry {
    collections: BTreeMap<CollectionId, MediaCollection>,
}

impl CollectionRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, collection: MediaCollection) {
        self.collections.insert(collection.id.clone(), collection);
    }

    pub fn get(&self, id: &CollectionId) -> Option<&MediaCollection> {
        self.collections.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &MediaCollection> {
        self.collections.values()
    }

    /// Resolves by item id first, then by exact item name.
    pub fn get_item(
        &self,
        collection: &CollectionId,
        name_or_id: &str,
    ) -> Result<&MediaItem, CollectionError> {
        let col = self
            .get(collection)
            .ok_or_else(|| CollectionError::NotFound(format!("collection {collection}")))?;
        col.items
            .iter()
            .find(|i| i.id.as_str() == name_or_id)
            .or_else(|| col.items.iter().find(|i| i.name == name_or_id))
            .ok_or_else(|| CollectionError::NotFound(format!("item {name_or_id}")))
    }

    /// Finds an item by id across all collections.
    pub fn find_item(&self, id: &ItemId) -> Option<(&MediaCollection, &MediaItem)> {
        self.collections
            .values()
            .find_map(|c| c.items.iter().find(|i| &i.id == id).map(|i| (c, i)))
    }
}

/// Inclusive byte span selected by a range request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ByteSpan {
    pub start: u64,
    pub end: u64,
    pub total: u64,
    /// False when the whole file was requested (no `Range` header).
    pub partial: bool,
}

impl ByteSpan {
    pub fn len(&self) -> u64 {
        if self.total == 0 {
            0
        } else {
            self.end - self.start + 1
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn content_range(&self) -> String {
        format!("bytes {}-{}/{}", self.start, self.end, self.total)
    }
}

/// Resolves a single-range `Range` header (`bytes=a-b`, `bytes=a-`,
/// `bytes=-n`) against a file of `total` bytes. A missing header selects the
/// whole file. Multi-range requests are served as their first range.
pub fn resolve_range(header: Option<&str>, total: u64) -> Result<ByteSpan, CollectionError> {
    let full = ByteSpan {
        start: 0,
        end: total.saturating_sub(1),
        total,
        partial: false,
    };
    let Some(header) = header else {
        return Ok(full);
    };
    let invalid = || CollectionError::InvalidRange { total };
    let spec = header.trim().strip_prefix("bytes=").ok_or_else(invalid)?;
    let first = spec.split(',').next().unwrap_or("").trim();
    let (a, b) = first.split_once('-').ok_or_else(invalid)?;
    let parse = |s: &str| s.trim().parse::<u64>().map_err(|_| invalid());
    let (start, end) = match (a.trim().is_empty(), b.trim().is_empty()) {
        (true, true) => return Err(invalid()),
        (true, false) => {
            let suffix = parse(b)?;
            if suffix == 0 || total == 0 {
                return Err(invalid());
            }
            (total.saturating_sub(suffix), total - 1)
        }
        (false, true) => (parse(a)?, total.saturating_sub(1)),
        (false, false) => (parse(a)?, parse(b)?.min(total.saturating_sub(1))),
    };
    if start >= total || start > end {
        return Err(invalid());
    }
    Ok(ByteSpan {
        start,
        end,
        total,
        partial: true,
    })
}

/// What a media request resolved to; the transport streams `span` of `path`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MediaSlice {
    pub path: PathBuf,
    pub span: ByteSpan,
    pub content_type: &'static str,
}

impl MediaSlice {
    pub fn read(&self) -> io::Result<Vec<u8>> {
        let mut file = File::open(&self.path)?;
        file.seek(SeekFrom::Start(self.span.start))?;
        let mut buf = vec![0u8; self.span.len() as usize];
        file.read_exact(&mut buf)?;
        Ok(buf)
    }
}

/// Locates an item's file and applies the range header to it.
pub fn serve_media_range(
    registry: &CollectionRegistry,
    item: &ItemId,
    range: Option<&str>,
) -> Result<MediaSlice, CollectionError> {
    let (collection, item) = registry
        .find_item(item)
        .ok_or_else(|| CollectionError::NotFound(format!("item {item}")))?;
    let path = collection.base_path.join(&item.location);
    let total = std::fs::metadata(&path)
        .map_err(|_| CollectionError::NotFound(format!("file for item {}", item.name)))?
        .len();
    Ok(MediaSlice {
        span: resolve_range(range, total)?,
        content_type: content_type_for(&item.location),
        path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    /// Minimal ISO-BMFF file: ftyp + moov(mvhd v0).
    pub(crate) fn tiny_mp4(timescale: u32, duration: u32) -> Vec<u8> {
        let mut mvhd = vec![0u8; 4 + 4 + 4 + 4 + 4];
        mvhd[12..16].copy_from_slice(&timescale.to_be_bytes());
        mvhd[16..20].copy_from_slice(&duration.to_be_bytes());
        mvhd.extend_from_slice(&[0u8; 80]);
        let boxed = |kind: &[u8; 4], body: &[u8]| {
            let mut b = ((body.len() + 8) as u32).to_be_bytes().to_vec();
            b.extend_from_slice(kind);
            b.extend_from_slice(body);
            b
        };
        let mut out = boxed(b"ftyp", b"isom\0\0\0\0");
        out.extend(boxed(b"moov", &boxed(b"mvhd", &mvhd)));
        out
    }

    #[test]
    fn ingests_named_video() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("videos")).unwrap();
        fs::write(
            dir.path().join("videos/v-09679.mp4"),
            tiny_mp4(1000, 42_500),
        )
        .unwrap();
        fs::write(dir.path().join("door.jpg"), b"jpg").unwrap();
        fs::write(dir.path().join("notes.txt"), b"ignored").unwrap();
        let col = ingest_directory(dir.path(), "vbs").unwrap();
        assert_eq!(col.items.len(), 2);
        let reg = {
            let mut r = CollectionRegistry::new();
            r.insert(col.clone());
            r
        };
        let v = reg.get_item(&col.id, "v-09679").unwrap();
        assert_eq!(v.kind, MediaKind::Video);
        assert_eq!(v.duration_ms, 42_500);
        assert_eq!(v.location, "videos/v-09679.mp4");
        assert!(!v.duration_unknown);
        let img = reg.get_item(&col.id, "door").unwrap();
        assert_eq!((img.kind, img.duration_ms), (MediaKind::Image, 0));
        // lookup by id resolves to the same item as by name
        assert_eq!(reg.get_item(&col.id, v.id.as_str()).unwrap(), v);
        assert!(matches!(
            reg.get_item(&col.id, "v-00000"),
            Err(CollectionError::NotFound(_))
        ));
    }

    #[test]
    fn webm_duration_is_flagged() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("clip.webm"), b"\x1a\x45\xdf\xa3").unwrap();
        let col = ingest_directory(dir.path(), "c").unwrap();
        assert_eq!(col.items[0].duration_ms, 0);
        assert!(col.items[0].duration_unknown);
    }

    #[test]
    fn empty_directory_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(ingest_directory(dir.path(), "c").unwrap().items.is_empty());
        assert!(matches!(
            ingest_directory(&dir.path().join("missing"), "c"),
            Err(CollectionError::PathUnreadable { .. })
        ));
        fs::create_dir_all(dir.path().join("x")).unwrap();
        fs::create_dir_all(dir.path().join("y")).unwrap();
        fs::write(dir.path().join("x/a.mp4"), b"").unwrap();
        fs::write(dir.path().join("y/a.mp4"), b"").unwrap();
        assert!(matches!(
            ingest_directory(dir.path(), "c"),
            Err(CollectionError::DuplicateItemName { name, .. }) if name == "a"
        ));
    }

    #[test]
    fn ingestion_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("v-1.mp4"), tiny_mp4(600, 6000)).unwrap();
        fs::write(dir.path().join("i-2.png"), b"png").unwrap();
        let a = ingest_directory(dir.path(), "c").unwrap();
        let b = ingest_directory(dir.path(), "c").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.items[1].duration_ms, 10_000);
    }

    #[test]
    fn ranges() {
        let total = 10 * 1024;
        let span = resolve_range(Some("bytes=0-1023"), total).unwrap();
        assert_eq!((span.len(), span.partial), (1024, true));
        assert_eq!(span.content_range(), "bytes 0-1023/10240");
        assert!(matches!(
            resolve_range(Some("bytes=20000-"), total),
            Err(CollectionError::InvalidRange { .. })
        ));
        let full = resolve_range(None, total).unwrap();
        assert_eq!((full.len(), full.partial), (total, false));
        assert_eq!(
            resolve_range(Some("bytes=-100"), total).unwrap().start,
            total - 100
        );
        assert_eq!(
            resolve_range(Some("bytes=10000-99999"), total).unwrap().end,
            total - 1
        );
        assert!(resolve_range(Some("items=0-1"), total).is_err());
        assert!(resolve_range(Some("bytes=5-1"), total).is_err());
    }

    #[test]
    fn serves_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let data: Vec<u8> = (0..10 * 1024).map(|i| (i % 251) as u8).collect();
        fs::write(dir.path().join("v-1.mp4"), &data).unwrap();
        let col = ingest_directory(dir.path(), "c").unwrap();
        let id = col.items[0].id.clone();
        let mut reg = CollectionRegistry::new();
        reg.insert(col);
        let slice = serve_media_range(&reg, &id, Some("bytes=0-1023")).unwrap();
        assert_eq!(slice.read().unwrap(), &data[..1024]);
        assert_eq!(slice.content_type, "video/mp4");
        let whole = serve_media_range(&reg, &id, None).unwrap();
        assert_eq!(whole.read().unwrap(), data);
        assert!(matches!(
            serve_media_range(&reg, &"nope".into(), None),
            Err(CollectionError::NotFound(_))
        ));
    }
}
