use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use lord_core::ppo::{checkpoint_save, PolicyParams};
use lord_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    unsafe { lord_last_error(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn env_for(setting: &str) -> *mut LordEnv {
    let name = CString::new(setting).unwrap();
    let mut env = ptr::null_mut();
    assert_eq!(unsafe { lord_env_new_setting(name.as_ptr(), &mut env) }, LordStatus::Ok);
    env
}

#[test]
fn episode_through_the_abi() {
    let env = env_for("lane-3-density-1");
    let spec = CString::new("kind = \"grad\"").unwrap();
    unsafe {
        assert_eq!(lord_env_set_reward(env, spec.as_ptr(), ptr::null()), LordStatus::Ok);
        let mut r = LordStepResult::default();
        assert_eq!(lord_env_step(env, 1, &mut r), LordStatus::Lifecycle);
        assert!(last_error().contains("reset"));
        assert_eq!(lord_env_reset(env, 5), LordStatus::Ok);
        let mut xs = vec![];
        loop {
            assert_eq!(lord_env_step(env, 1, &mut r), LordStatus::Ok);
            assert!((r.reward - lord_grad_reward(r.ego_speed, r.collided)).abs() < 1e-12);
            xs.push(r.ego_x);
            if r.terminated || r.truncated {
                break;
            }
        }
        assert!(xs.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(r.step_index as usize, xs.len());
        lord_env_free(env);
    }
}

#[test]
fn same_seed_same_trajectory() {
    let run = || {
        let env = env_for("lane-4-density-2");
        let mut out = vec![];
        unsafe {
            lord_env_reset(env, 41);
            let mut r = LordStepResult::default();
            for a in [3u32, 0, 1, 2, 4, 1, 1] {
                if lord_env_step(env, a, &mut r) != LordStatus::Ok {
                    break;
                }
                assert!(r.reward.is_nan());
                out.push((r.ego_x.to_bits(), r.collided));
            }
            lord_env_free(env);
        }
        out
    };
    assert_eq!(run(), run());
}

#[test]
fn observations_and_buffers() {
    let env = env_for("lane-4-density-2");
    unsafe {
        assert_eq!(lord_env_reset(env, 11), LordStatus::Ok);
        let n = lord_env_observation_len(env);
        assert_eq!(n, 264);
        let mut obs = vec![0.0; n];
        assert_eq!(lord_env_observation(env, obs.as_mut_ptr(), n - 1), LordStatus::BufferTooSmall);
        assert_eq!(lord_env_observation(env, obs.as_mut_ptr(), n), LordStatus::Ok);
        assert_eq!(obs[0], 1.0);

        let mut needed = 0usize;
        let mut tiny = [0 as c_char; 4];
        assert_eq!(lord_env_text(env, tiny.as_mut_ptr(), tiny.len(), &mut needed), LordStatus::BufferTooSmall);
        let mut buf = vec![0 as c_char; needed];
        assert_eq!(lord_env_text(env, buf.as_mut_ptr(), buf.len(), ptr::null_mut()), LordStatus::Ok);
        let text = CStr::from_ptr(buf.as_ptr()).to_str().unwrap();
        assert_eq!(text.len() + 1, needed);
        assert!(text.ends_with('.'));

        let mut frame = vec![0u8; LORD_FRAME_BYTES];
        assert_eq!(lord_env_render(env, frame.as_mut_ptr(), frame.len()), LordStatus::Ok);
        let center = (112 * 224 + 112) * 3;
        assert_eq!(&frame[center..center + 3], &[255, 255, 255]);
        lord_env_free(env);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut env = ptr::null_mut();
        let bad = CString::new("lane_count = 0").unwrap();
        assert_eq!(lord_env_new(bad.as_ptr(), &mut env), LordStatus::Config);
        assert!(env.is_null());
        assert!(last_error().contains("lane_count"));
        let unknown = CString::new("no_such_key = 1").unwrap();
        assert_eq!(lord_env_new(unknown.as_ptr(), &mut env), LordStatus::Config);
        assert_eq!(lord_env_new(ptr::null(), ptr::null_mut()), LordStatus::NullPointer);
        assert_eq!(lord_env_reset(ptr::null_mut(), 0), LordStatus::NullPointer);
        assert_eq!(lord_env_observation_len(ptr::null()), 0);

        assert_eq!(lord_env_new(ptr::null(), &mut env), LordStatus::Ok);
        let spec = CString::new("kind = \"telepathy\"").unwrap();
        assert_eq!(lord_env_set_reward(env, spec.as_ptr(), ptr::null()), LordStatus::Config);
        let spec = CString::new("kind = \"lord_opposite\"\nmodality = \"text\"").unwrap();
        let endpoint = CString::new("http://127.0.0.1:9").unwrap();
        assert_eq!(lord_env_set_reward(env, spec.as_ptr(), endpoint.as_ptr()), LordStatus::Unavailable);
        let mut r = LordStepResult::default();
        assert_eq!(lord_env_reset(env, 1), LordStatus::Ok);
        assert_eq!(lord_env_step(env, 7, &mut r), LordStatus::InvalidArgument);
        lord_env_free(env);
        lord_env_free(ptr::null_mut());

        let name = CStr::from_ptr(lord_status_name(LordStatus::Persistence)).to_str().unwrap();
        assert_eq!(name, "persistence error");
        let needed = lord_last_error(ptr::null_mut(), 0);
        assert!(needed > 1);
        assert_eq!(needed, last_error().len() + 1);
    }
}

#[test]
fn reward_functions() {
    unsafe {
        let (a, b) = ([1.0, 1.0], [1.0, 0.0]);
        let mut out = 0.0;
        assert_eq!(lord_cosine_similarity(a.as_ptr(), b.as_ptr(), 2, &mut out), LordStatus::Ok);
        assert!((out - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert_eq!(lord_opposite_reward(b.as_ptr(), b.as_ptr(), 2, &mut out), LordStatus::Ok);
        assert_eq!(out, 0.0);
        let z = [0.0, 0.0];
        assert_eq!(lord_opposite_reward(z.as_ptr(), b.as_ptr(), 2, &mut out), LordStatus::InvalidArgument);
        assert_eq!(lord_grad_reward(40.0, false), 1.0);
        assert_eq!(lord_grad_reward(40.0, true), 0.0);
    }
}

#[test]
fn policies_load_and_act() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.ckpt");
    let mut params = PolicyParams::driving(264, &[8], 4);
    params.zero_heads();
    checkpoint_save(&params, &path).unwrap();
    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    unsafe {
        let mut policy = ptr::null_mut();
        assert_eq!(lord_policy_load(cpath.as_ptr(), 1, &mut policy), LordStatus::Ok);
        let obs = vec![0.0; 264];
        let mut probs = [0.0; LORD_ACTION_COUNT];
        let mut value = f64::NAN;
        assert_eq!(lord_policy_evaluate(policy, obs.as_ptr(), 264, probs.as_mut_ptr(), &mut value), LordStatus::Ok);
        assert!(probs.iter().all(|p| (p - 0.2).abs() < 1e-15));
        assert_eq!(value, 0.0);
        assert_eq!(lord_policy_evaluate(policy, obs.as_ptr(), 12, probs.as_mut_ptr(), ptr::null_mut()), LordStatus::InvalidArgument);

        let env = env_for("lane-4-density-2");
        lord_env_reset(env, 3);
        let mut action = 99;
        assert_eq!(lord_policy_act(policy, env, &mut action), LordStatus::Ok);
        assert!(action < 5);
        lord_env_free(env);
        lord_policy_free(policy);

        let missing = CString::new(dir.path().join("none.ckpt").to_str().unwrap()).unwrap();
        assert_eq!(lord_policy_load(missing.as_ptr(), 1, &mut policy), LordStatus::Persistence);
    }
}

/// Builds the static library in a separate target dir, since the test
/// harness only links the rlib and holds the lock on the main one.
fn static_lib() -> PathBuf {
    // tests run from target/<profile>/deps
    let target = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().parent().unwrap().join("c-smoke");
    let status = Command::new(env!("CARGO"))
        .args(["build", "--quiet", "-p", "lord-ffi", "--target-dir"])
        .arg(&target)
        .status()
        .unwrap();
    assert!(status.success());
    target.join("debug").join("liblord_ffi.a")
}

#[test]
fn c_program_links_against_the_header() {
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let lib = static_lib();
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new(std::env::var("CC").unwrap_or_else(|_| "cc".into()))
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(crate_dir.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());

    let ckpt = dir.path().join("p.ckpt");
    checkpoint_save(&PolicyParams::driving(264, &[8], 4), &ckpt).unwrap();
    for extra in [vec![], vec![ckpt.to_str().unwrap().to_owned()]] {
        let out = Command::new(&exe).args(&extra).output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stdout).starts_with("steps="));
    }
}
