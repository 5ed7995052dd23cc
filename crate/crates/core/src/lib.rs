pub mod analytics;
pub mod assoc;
pub mod bench;
pub mod cli;
pub mod packet;
pub mod pipeline;
pub mod store;

/// `path` with `.tmp~` appended, for write-then-rename.
pub(crate) fn tmp_sibling(path: &std::path::Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".tmp~");
    s.into()
}
