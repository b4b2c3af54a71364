//! Host-process backend: each sandbox is a scratch directory holding the
//! checkout and a virtual environment built from a host interpreter.
//!
//! Commands see the logical layout (`/testbed`, `/opt/venv`, `/tmp`) through
//! path rewriting in both directions, so transcripts do not depend on where
//! the scratch directory lives. Network access is not restricted.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use wait_timeout::ChildExt;

use super::{ExecOptions, ExecResult, Runtime, Sandbox, SandboxError, SandboxSpec, TIMEOUT_EXIT, VENV, WORKDIR};

const ORIGIN_FILE: &str = ".sandbox-origin";
const MAX_OUTPUT: usize = 16 << 20;

const UV_SHIM: &str = r#"#!/bin/bash
if [ "$1" = "pip" ]; then
  shift; sub="$1"; shift
  args=()
  while [ $# -gt 0 ]; do
    case "$1" in
      --exclude-newer) shift; [ $# -gt 0 ] && shift; continue;;
      --exclude-newer=*|--system) shift; continue;;
    esac
    args+=("$1"); shift
  done
  if [ "$sub" = "install" ]; then exec python -m pip install --no-build-isolation "${args[@]}"; fi
  exec python -m pip "$sub" "${args[@]}"
fi
if [ "$1" = "run" ]; then shift; exec "$@"; fi
if [ "$1" = "venv" ]; then exit 0; fi
echo "uv: unsupported in local sandbox: $*" >&2
exit 2
"#;

const PIP_SHIM: &str = "#!/bin/bash\nexec python -m pip \"$@\"\n";
const PYTEST_SHIM: &str = "#!/bin/bash\nexec python -m pytest \"$@\"\n";

pub struct LocalRuntime {
    root: PathBuf,
    _scratch: Option<tempfile::TempDir>,
    counter: AtomicU64,
    real_uv: bool,
}

fn find_in_path(name: &str) -> Option<PathBuf> {
    let path = std::env::var_os("PATH")?;
    std::env::split_paths(&path).map(|d| d.join(name)).find(|p| p.is_file())
}

fn sanitize(image: &str) -> String {
    image
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn run_host(cmd: &mut Command) -> Result<String, String> {
    let out = cmd.stdin(Stdio::null()).output().map_err(|e| e.to_string())?;
    let text = format!(
        "{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    if out.status.success() {
        Ok(text)
    } else {
        Err(text.trim().to_string())
    }
}

fn copy_tree(from: &Path, to: &Path) -> Result<(), SandboxError> {
    run_host(Command::new("cp").arg("-a").arg(from).arg(to)).map_err(|e| SandboxError::Io(std::io::Error::other(e)))?;
    Ok(())
}

/// Cached bytecode is validated by source mtime and size, both of which can
/// survive a same-length rewrite within one second.
fn drop_bytecode(source: &Path) {
    let (Some(dir), Some(stem)) = (source.parent(), source.file_stem()) else {
        return;
    };
    if source.extension().is_none_or(|e| e != "py") {
        return;
    }
    let prefix = format!("{}.", stem.to_string_lossy());
    if let Ok(entries) = std::fs::read_dir(dir.join("__pycache__")) {
        for e in entries.flatten() {
            if e.file_name().to_string_lossy().starts_with(&prefix) {
                let _ = std::fs::remove_file(e.path());
            }
        }
    }
}

/// Rewrites absolute references to `old` inside text files and symlinks.
fn relocate(dir: &Path, old: &str, new: &str) -> std::io::Result<()> {
    for entry in walkdir::WalkDir::new(dir).follow_links(false) {
        let entry = entry.map_err(std::io::Error::other)?;
        let path = entry.path();
        if path.components().any(|c| c.as_os_str() == "objects") && path.to_string_lossy().contains("/.git/") {
            continue;
        }
        let ft = entry.file_type();
        if ft.is_symlink() {
            let target = std::fs::read_link(path)?;
            let t = target.to_string_lossy();
            if t.starts_with(old) {
                let moved = t.replacen(old, new, 1);
                std::fs::remove_file(path)?;
                std::os::unix::fs::symlink(moved, path)?;
            }
        } else if ft.is_file() && entry.metadata().is_ok_and(|m| m.len() < 8 << 20) {
            let bytes = std::fs::read(path)?;
            if bytes.contains(&0) {
                continue;
            }
            if let Ok(text) = std::str::from_utf8(&bytes) {
                if text.contains(old) {
                    std::fs::write(path, text.replace(old, new))?;
                    drop_bytecode(path);
                }
            }
        }
    }
    Ok(())
}

impl LocalRuntime {
    /// Uses `root` for sandboxes and images, or a temporary directory that
    /// disappears with the runtime.
    pub fn new(root: Option<&Path>) -> Result<LocalRuntime, SandboxError> {
        let (root, scratch) = match root {
            Some(r) => {
                std::fs::create_dir_all(r)?;
                (r.canonicalize()?, None)
            }
            None => {
                let t = tempfile::Builder::new().prefix("benchgen-local-").tempdir()?;
                (t.path().canonicalize()?, Some(t))
            }
        };
        std::fs::create_dir_all(root.join("boxes"))?;
        std::fs::create_dir_all(root.join("images"))?;
        if find_in_path("bash").is_none() || find_in_path("git").is_none() {
            return Err(SandboxError::RuntimeUnavailable(
                "local runtime needs bash and git on PATH".into(),
            ));
        }
        Ok(LocalRuntime {
            root,
            _scratch: scratch,
            counter: AtomicU64::new(0),
            real_uv: find_in_path("uv").is_some(),
        })
    }

    fn fresh_dir(&self) -> (String, PathBuf) {
        let n = self.counter.fetch_add(1, Ordering::SeqCst);
        let id = format!("lb-{}-{n}", std::process::id());
        let dir = self.root.join("boxes").join(&id);
        (id, dir)
    }

    fn image_dir(&self, image: &str) -> PathBuf {
        self.root.join("images").join(sanitize(image))
    }

    fn provision(&self, dir: &Path, python_version: &str) -> Result<(), SandboxError> {
        let interp = find_in_path(&format!("python{python_version}"))
            .ok_or_else(|| SandboxError::InterpreterUnavailable(python_version.to_string()))?;
        let venv = dir.join("venv");
        run_host(
            Command::new(&interp)
                .args(["-m", "venv", "--system-site-packages", "--without-pip"])
                .arg(&venv),
        )
        .map_err(|e| SandboxError::InterpreterUnavailable(format!("{python_version}: {e}")))?;
        let bin = venv.join("bin");
        let mut shims = vec![("pip", PIP_SHIM), ("pip3", PIP_SHIM), ("pytest", PYTEST_SHIM)];
        if !self.real_uv {
            shims.push(("uv", UV_SHIM));
        }
        for (name, body) in shims {
            let p = bin.join(name);
            std::fs::write(&p, body)?;
            use std::os::unix::fs::PermissionsExt;
            std::fs::set_permissions(&p, std::fs::Permissions::from_mode(0o755))?;
        }
        Ok(())
    }
}

impl Runtime for LocalRuntime {
    fn create(&self, spec: &SandboxSpec, source: &str, commit: &str) -> Result<Box<dyn Sandbox>, SandboxError> {
        let (id, dir) = self.fresh_dir();
        for sub in ["home", "tmp"] {
            std::fs::create_dir_all(dir.join(sub))?;
        }
        let sandbox = LocalSandbox {
            id,
            dir: dir.clone(),
            images: self.root.join("images"),
        };
        let testbed = dir.join("testbed");
        run_host(
            Command::new("git")
                .args(["clone", "--quiet", "--no-checkout", source])
                .arg(&testbed),
        )
        .map_err(SandboxError::CloneError)?;
        run_host(Command::new("git").arg("-C").arg(&testbed).args([
            "-c",
            "advice.detachedHead=false",
            "checkout",
            "--quiet",
            commit,
        ]))
        .map_err(SandboxError::CloneError)?;
        self.provision(&dir, &spec.python_version)?;
        sandbox.write_origin()?;
        Ok(Box::new(sandbox))
    }

    fn restore(&self, image: &str, _spec: &SandboxSpec) -> Result<Box<dyn Sandbox>, SandboxError> {
        let src = self.image_dir(image);
        if !src.is_dir() {
            return Err(SandboxError::RuntimeUnavailable(format!("no such image: {image}")));
        }
        let (id, dir) = self.fresh_dir();
        copy_tree(&src, &dir)?;
        let old = std::fs::read_to_string(dir.join(ORIGIN_FILE))?;
        relocate(&dir, old.trim(), &dir.to_string_lossy())?;
        let sandbox = LocalSandbox {
            id,
            dir,
            images: self.root.join("images"),
        };
        sandbox.write_origin()?;
        Ok(Box::new(sandbox))
    }

    fn image_exists(&self, image: &str) -> bool {
        self.image_dir(image).is_dir()
    }
}

pub struct LocalSandbox {
    id: String,
    dir: PathBuf,
    images: PathBuf,
}

impl LocalSandbox {
    fn write_origin(&self) -> std::io::Result<()> {
        std::fs::write(self.dir.join(ORIGIN_FILE), self.dir.to_string_lossy().as_bytes())
    }

    /// `(logical, physical)` pairs, most specific first.
    fn mounts(&self) -> Vec<(String, String)> {
        let d = self.dir.to_string_lossy().into_owned();
        vec![
            (WORKDIR.to_string(), format!("{d}/testbed")),
            (VENV.to_string(), format!("{d}/venv")),
            ("/tmp".to_string(), format!("{d}/tmp")),
            ("/root".to_string(), format!("{d}/home")),
        ]
    }

    fn to_physical(&self, text: &str) -> String {
        let mut out = String::with_capacity(text.len());
        let mounts = self.mounts();
        let mut i = 0;
        let bytes = text.as_bytes();
        'outer: while i < text.len() {
            let at_boundary = i == 0
                || matches!(
                    bytes[i - 1],
                    b' ' | b'\t' | b'\n' | b'"' | b'\'' | b'=' | b':' | b'(' | b';' | b'&' | b'|' | b'>' | b'<'
                );
            if at_boundary {
                for (logical, physical) in &mounts {
                    if text[i..].starts_with(logical.as_str()) {
                        let end = i + logical.len();
                        if end == text.len()
                            || matches!(
                                bytes[end],
                                b'/' | b' ' | b'\t' | b'\n' | b'"' | b'\'' | b';' | b'&' | b'|' | b')' | b':'
                            )
                        {
                            out.push_str(physical);
                            i = end;
                            continue 'outer;
                        }
                    }
                }
            }
            let ch = text[i..].chars().next().unwrap_or(' ');
            out.push(ch);
            i += ch.len_utf8();
        }
        out
    }

    fn to_logical(&self, text: &str) -> String {
        let mut out = text.to_string();
        for (logical, physical) in self.mounts() {
            out = out.replace(&physical, &logical);
        }
        out.replace(&*self.dir.to_string_lossy(), "/sandbox")
    }

    fn env(&self) -> Vec<(String, String)> {
        let d = self.dir.to_string_lossy();
        let host_path = std::env::var("PATH").unwrap_or_else(|_| "/usr/bin:/bin".into());
        let mut env: Vec<(String, String)> = vec![
            ("PATH".into(), format!("{d}/venv/bin:{host_path}")),
            ("VIRTUAL_ENV".into(), format!("{d}/venv")),
            ("HOME".into(), format!("{d}/home")),
            ("TMPDIR".into(), format!("{d}/tmp")),
            ("LANG".into(), "C.UTF-8".into()),
            ("TERM".into(), "dumb".into()),
            ("PYTHONDONTWRITEBYTECODE".into(), "1".into()),
            ("PYTHONHASHSEED".into(), "0".into()),
            ("PIP_DISABLE_PIP_VERSION_CHECK".into(), "1".into()),
            ("PIP_NO_INPUT".into(), "1".into()),
            ("PIP_NO_CACHE_DIR".into(), "1".into()),
        ];
        for (k, v) in std::env::vars() {
            let lower = k.to_ascii_lowercase();
            let pass = lower.ends_with("_proxy")
                || (k.starts_with("PIP_") && k != "PIP_CACHE_DIR")
                || k.starts_with("UV_")
                || k == "SSL_CERT_FILE"
                || k == "REQUESTS_CA_BUNDLE";
            if pass && !env.iter().any(|(e, _)| *e == k) {
                env.push((k, v));
            }
        }
        env
    }
}

fn kill_group(pid: u32) {
    let _ = Command::new("kill")
        .args(["-KILL", "--", &format!("-{pid}")])
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .status();
}

impl Sandbox for LocalSandbox {
    fn id(&self) -> &str {
        &self.id
    }

    fn exec(&mut self, command: &str, opts: ExecOptions) -> Result<ExecResult, SandboxError> {
        let testbed = self.dir.join("testbed");
        if !testbed.is_dir() {
            return Err(SandboxError::SandboxDead(self.id.clone()));
        }
        let (mut reader, writer) = std::io::pipe()?;
        let mut cmd = Command::new("bash");
        cmd.arg("-c")
            .arg(self.to_physical(command))
            .current_dir(&testbed)
            .env_clear()
            .envs(self.env())
            .stdin(Stdio::null())
            .stdout(writer.try_clone()?)
            .stderr(writer);
        std::os::unix::process::CommandExt::process_group(&mut cmd, 0);
        let start = Instant::now();
        let mut child = cmd.spawn()?;
        drop(cmd);

        let buf = Arc::new(Mutex::new(Vec::new()));
        let sink = buf.clone();
        let (done_tx, done_rx) = std::sync::mpsc::channel();
        std::thread::spawn(move || {
            let mut chunk = [0u8; 65536];
            while let Ok(n) = reader.read(&mut chunk) {
                if n == 0 {
                    break;
                }
                let mut b = sink.lock().unwrap_or_else(|e| e.into_inner());
                b.extend_from_slice(&chunk[..n]);
                if b.len() > MAX_OUTPUT {
                    let cut = b.len() - MAX_OUTPUT;
                    b.drain(..cut);
                }
            }
            let _ = done_tx.send(());
        });

        let status = child.wait_timeout(opts.timeout)?;
        let timed_out = status.is_none();
        kill_group(child.id());
        let status = match status {
            Some(s) => s,
            None => child.wait()?,
        };
        let _ = done_rx.recv_timeout(Duration::from_secs(2));
        let duration_secs = start.elapsed().as_secs_f64();
        let bytes = std::mem::take(&mut *buf.lock().unwrap_or_else(|e| e.into_inner()));
        let mut output = self.to_logical(&String::from_utf8_lossy(&bytes));
        let exit_code = if timed_out {
            output.push_str(&format!("\n[command timed out after {}s]\n", opts.timeout.as_secs()));
            TIMEOUT_EXIT
        } else {
            status.code().unwrap_or(128 + 9)
        };
        Ok(ExecResult {
            command: command.to_string(),
            exit_code,
            output,
            duration_secs,
            timed_out,
        })
    }

    fn write_file(&mut self, path: &str, contents: &[u8]) -> Result<(), SandboxError> {
        let logical = if path.starts_with('/') {
            path.to_string()
        } else {
            format!("{WORKDIR}/{path}")
        };
        let physical = PathBuf::from(self.to_physical(&logical));
        if !physical.starts_with(&self.dir) {
            return Err(SandboxError::Io(std::io::Error::other(format!(
                "{path} is outside the sandbox"
            ))));
        }
        if let Some(parent) = physical.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(physical, contents)?;
        Ok(())
    }

    fn snapshot(&mut self, tag: &str) -> Result<String, SandboxError> {
        let target = self.images.join(sanitize(tag));
        let staging = self.images.join(format!(".{}.partial", sanitize(tag)));
        let _ = std::fs::remove_dir_all(&staging);
        copy_tree(&self.dir, &staging)?;
        std::fs::write(staging.join(ORIGIN_FILE), self.dir.to_string_lossy().as_bytes())?;
        let _ = std::fs::remove_dir_all(&target);
        std::fs::rename(&staging, &target)?;
        Ok(tag.to_string())
    }
}

impl Drop for LocalSandbox {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.dir);
    }
}
