mod common;

use std::time::Duration;

use benchgen::sandbox::{apply_patch, ExecOptions, LocalRuntime, Runtime, SandboxError, SandboxSpec, TIMEOUT_EXIT};
use common::{host_python, repo_with};

fn spec(py: &str) -> SandboxSpec {
    SandboxSpec {
        base_image: "unused".into(),
        python_version: py.into(),
        cpu_limit: 1.0,
        mem_limit_mb: 512,
        install_timeout: Duration::from_secs(60),
        test_timeout: Duration::from_secs(60),
    }
}

const OPTS: ExecOptions = ExecOptions {
    timeout: Duration::from_secs(30),
    network: false,
};

#[test]
fn exec_basics_and_timeout() {
    let tmp = tempfile::tempdir().unwrap();
    let (repo, head) = repo_with(tmp.path(), &[("marker.txt", "hello\n")]);
    let rt = LocalRuntime::new(Some(&tmp.path().join("rt"))).unwrap();
    let mut sb = rt.create(&spec(&host_python()), repo.to_str().unwrap(), &head).unwrap();

    assert_eq!(sb.exec("git rev-parse HEAD", OPTS).unwrap().output.trim(), head);
    assert_eq!(sb.exec("exit 1", OPTS).unwrap().exit_code, 1);
    let hi = sb.exec("echo hi; echo oops >&2", OPTS).unwrap();
    assert_eq!((hi.exit_code, hi.output.as_str()), (0, "hi\noops\n"));
    let py = sb.exec("python --version", OPTS).unwrap();
    assert!(
        py.output.starts_with(&format!("Python {}.", host_python())),
        "{}",
        py.output
    );
    assert_eq!(sb.exec("pwd", OPTS).unwrap().output.trim(), "/testbed");
    assert_eq!(sb.exec("echo $VIRTUAL_ENV", OPTS).unwrap().output.trim(), "/opt/venv");

    let slow = sb
        .exec(
            "sleep 999",
            ExecOptions {
                timeout: Duration::from_secs(2),
                network: false,
            },
        )
        .unwrap();
    assert!(slow.timed_out);
    assert_eq!(slow.exit_code, TIMEOUT_EXIT);
    assert!(slow.duration_secs < 10.0);
}

#[test]
fn clone_and_interpreter_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let (repo, _) = repo_with(tmp.path(), &[("a", "a")]);
    let rt = LocalRuntime::new(None).unwrap();
    let bad = rt.create(
        &spec(&host_python()),
        repo.to_str().unwrap(),
        "0123456789abcdef0123456789abcdef01234567",
    );
    assert!(matches!(bad, Err(SandboxError::CloneError(_))));
    let (_, head) = (0, common::git(&repo, &["rev-parse", "HEAD"]));
    let nopy = rt.create(&spec("2.1"), repo.to_str().unwrap(), &head);
    assert!(matches!(nopy, Err(SandboxError::InterpreterUnavailable(_))));
}

#[test]
fn snapshot_restore_round_trip_and_isolation() {
    let tmp = tempfile::tempdir().unwrap();
    let (repo, head) = repo_with(
        tmp.path(),
        &[
            ("pyproject.toml", "[project]\nname = \"toypkg\"\nversion = \"0.1\"\n[build-system]\nrequires = [\"setuptools\"]\nbuild-backend = \"setuptools.build_meta\"\n"),
            ("toypkg/__init__.py", "VALUE = 7\n"),
        ],
    );
    let rt = LocalRuntime::new(None).unwrap();
    let mut sb = rt.create(&spec(&host_python()), repo.to_str().unwrap(), &head).unwrap();
    let install = sb
        .exec(
            "uv pip install -e . --exclude-newer 2022-01-01",
            ExecOptions {
                timeout: Duration::from_secs(300),
                network: true,
            },
        )
        .unwrap();
    assert_eq!(install.exit_code, 0, "{}", install.output);
    sb.exec("echo before > marker", OPTS).unwrap();
    let image = sb.snapshot("localhost/t/setupagent-toy:abc").unwrap();
    drop(sb);

    let mut a = rt.restore(&image, &spec(&host_python())).unwrap();
    let mut b = rt.restore(&image, &spec(&host_python())).unwrap();
    assert_eq!(a.exec("cat marker", OPTS).unwrap().output, "before\n");
    a.exec("echo only-a > marker", OPTS).unwrap();
    assert_eq!(b.exec("cat marker", OPTS).unwrap().output, "before\n");
    let imported = b
        .exec("cd /tmp && python -c 'import toypkg; print(toypkg.VALUE)'", OPTS)
        .unwrap();
    assert_eq!(imported.output.trim(), "7", "{}", imported.output);

    assert!(matches!(
        rt.restore("localhost/t/never:created", &spec(&host_python())),
        Err(SandboxError::RuntimeUnavailable(_))
    ));
}

#[test]
fn patches_apply_or_fail() {
    let tmp = tempfile::tempdir().unwrap();
    let (repo, head) = repo_with(tmp.path(), &[("a.txt", "one\n")]);
    let rt = LocalRuntime::new(None).unwrap();
    let mut sb = rt.create(&spec(&host_python()), repo.to_str().unwrap(), &head).unwrap();
    let good = "--- a/a.txt\n+++ b/a.txt\n@@ -1 +1 @@\n-one\n+two\n";
    apply_patch(sb.as_mut(), good, "fix").unwrap();
    assert_eq!(sb.exec("cat a.txt", OPTS).unwrap().output, "two\n");
    let stale = "--- a/a.txt\n+++ b/a.txt\n@@ -1 +1 @@\n-zzz\n+two\n";
    assert!(matches!(
        apply_patch(sb.as_mut(), stale, "bad"),
        Err(SandboxError::PatchApply(_))
    ));
    apply_patch(sb.as_mut(), "", "empty").unwrap();
}
