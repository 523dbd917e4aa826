import csv
import json
import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to Python path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

import main as cli
from config.config import (DEFAULT_THETA_G, TRAINING_HASH_EXCLUDES, ExperimentConfig, SearchSpaceConfig,
                           load_config)
from core.checkpoint import CheckpointManager, load_checkpoint, save_checkpoint
from core.events import EventBus, EventTypes, publish_progress
from core.errors import CheckpointError, ConfigError, SearchFailedError, StageError, TrainingDivergedError
from core.seeding import stream
from modules.rat import GapSampler
from modules.harness import Pipeline, hyperparam_search, pipeline_stages, sample_trial, stage_exit_code
from modules.upn import UniversalPolicy, query
import modules.harness.hyperopt as hyperopt_module

TINY = {
    'env_id': 'point_mass',
    'horizon': 10,
    'network': {'hidden_width': 8, 'depth': 1},
    'upn': {'total_steps': 0, 'fine_tune_steps': 0, 'fine_tune_chunk': 10, 'ppo': {'batch_size': 10}},
    'rat': {'init_episodes': 0, 'real_steps': 0, 'ppo': {'batch_size': 10}},
    'suprat': {'dataset_steps': 0, 'epochs': 2},
    'eval': {'episodes': 2, 'deviation_levels': [0.0, 0.05], 'adjacent_samples': 2, 'dr_samples': 2},
    'search': {'trials': 1, 'trial_episodes': 1, 'objective_episodes': 1},
}

SMALL_BUDGETS = {
    'upn': {'total_steps': 20, 'fine_tune_steps': 20, 'fine_tune_chunk': 10,
            'ppo': {'batch_size': 10, 'epochs': 1}},
    'rat': {'init_episodes': 2, 'real_steps': 10, 'ppo': {'batch_size': 10, 'epochs': 1}},
    'suprat': {'dataset_steps': 30, 'epochs': 2},
}


def _config(tmp_path, **overrides) -> ExperimentConfig:
    data = json.loads(json.dumps(TINY))
    for section, values in overrides.items():
        if isinstance(values, dict):
            data.setdefault(section, {}).update(values)
        else:
            data[section] = values
    data['system'] = {'output_dir': str(tmp_path), 'show_progress': False}
    return ExperimentConfig.from_dict(data)


def test_empty_file_gives_defaults(tmp_path):
    path = tmp_path / "empty.json"
    path.write_text("", encoding='utf-8')
    cfg = load_config(str(path), environ={}, use_dotenv=False)
    assert cfg.theta_g == DEFAULT_THETA_G
    assert cfg.seed == 0
    assert cfg.search.trials == 40
    assert load_config(None, environ={}, use_dotenv=False).to_dict() == cfg.to_dict()


def test_theta_out_of_bound_names_key():
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_dict({'theta_g': [1.5, 0.5, 0.5, 0.5, 0.5]})
    assert info.value.key == "theta_g"
    assert "[0, 1)" in info.value.message


def test_nested_errors_name_dotted_key():
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_dict({'upn': {'ppo': {'clip': -1.0}}})
    assert info.value.key == "upn.ppo.clip"
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_dict({'rat': {'resett': True}})
    assert info.value.key == "rat.resett"


def test_batch_must_cover_horizon():
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_dict({'horizon': 50, 'upn': {'ppo': {'batch_size': 10}}})
    assert info.value.key == "upn.ppo.batch_size"


def test_missing_or_broken_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "nope.json"), environ={}, use_dotenv=False)
    broken = tmp_path / "broken.json"
    broken.write_text("{", encoding='utf-8')
    with pytest.raises(ConfigError):
        load_config(str(broken), environ={}, use_dotenv=False)


def test_environment_overrides():
    cfg = load_config(None, environ={'RATBENCH_SEED': '3', 'RATBENCH_UPN__PPO__CLIP': '0.1',
                                     'RATBENCH_ENV_ID': 'pendulum', 'OTHER': 'x'}, use_dotenv=False)
    assert cfg.seed == 3
    assert cfg.upn.ppo.clip == 0.1
    assert cfg.env_id == "pendulum"


def test_partial_section_keeps_section_defaults():
    cfg = ExperimentConfig.from_dict({'rat': {'ppo': {'clip': 0.3}}})
    assert cfg.rat.ppo.gamma == 0.9
    assert cfg.rat.ppo.clip == 0.3


def test_config_hash(tmp_path):
    cfg = ExperimentConfig()
    assert len(cfg.config_hash()) == 12
    assert cfg.config_hash() == ExperimentConfig().config_hash()
    moved = ExperimentConfig.from_dict({'system': {'output_dir': str(tmp_path)}})
    assert moved.config_hash() == cfg.config_hash()
    assert cfg.with_seed(1).config_hash() != cfg.config_hash()
    sweep = ExperimentConfig.from_dict({'eval': {'deviation_levels': [0.0, 0.3]}})
    assert sweep.config_hash() != cfg.config_hash()
    assert (sweep.config_hash(exclude=TRAINING_HASH_EXCLUDES)
            == cfg.config_hash(exclude=TRAINING_HASH_EXCLUDES))


def test_full_scale():
    cfg = ExperimentConfig().full_scale()
    assert (cfg.horizon, cfg.eval.episodes, cfg.eval.adjacent_samples) == (500, 100, 100)
    assert (cfg.network.hidden_width, cfg.network.depth) == (128, 5)
    ExperimentConfig.from_dict(cfg.to_dict())


def test_default_gap_sampler_bounds():
    cfg = ExperimentConfig()
    sampler = GapSampler(cfg.rat.gap_low, cfg.rat.gap_high)
    np.testing.assert_array_equal(sampler.low, [0.0, 1.0, 0.0, 0.0, 0.0])
    np.testing.assert_array_equal(sampler.high, [1.0, 3.0, 0.0, 0.0, 0.0])
    np.testing.assert_array_equal(sampler.support, [True, True, False, False, False])
    rng = np.random.default_rng(0)
    for _ in range(200):
        gap = sampler.sample(rng)
        assert sampler.contains(gap)
        assert 0.0 <= gap.offsets[0] < 1.0
        assert 1.0 <= gap.offsets[1] < 3.0
        assert not np.any(gap.offsets[2:])


def test_cli_scale_flag_spellings():
    parser = cli.build_parser()
    assert parser.parse_args(['pipeline', '--paper-scale']).full_scale
    assert parser.parse_args(['eval', '--full-scale']).full_scale
    assert parser.parse_args(['train-upn', '--paper-scale']).full_scale
    assert not parser.parse_args(['pipeline']).full_scale


def test_cli_paper_scale_resolves_full_protocol():
    args = cli.build_parser().parse_args(['pipeline', '--paper-scale', '--seed', '4'])
    cfg = cli.resolve_config(args)
    assert (cfg.horizon, cfg.eval.episodes, cfg.eval.adjacent_samples) == (500, 100, 100)
    assert (cfg.network.hidden_width, cfg.network.depth) == (128, 5)
    assert cfg.seed == 4


def test_config_save_load(tmp_path):
    cfg = ExperimentConfig.from_dict({'seed': 9, 'env_id': 'pendulum'})
    path = tmp_path / "cfg.json"
    cfg.save(str(path))
    assert ExperimentConfig.load(str(path)).to_dict() == cfg.to_dict()


def test_checkpoint_save_load_save_is_byte_identical(tmp_path):
    payload = {'weights': [0.1, 1 / 3, -2.5e-17], 'name': 'x'}
    first = save_checkpoint(tmp_path / "a.ckpt", "upn", payload, 0, "abc", {'steps': 10})
    document = load_checkpoint(first, expected_kind="upn")
    second = save_checkpoint(tmp_path / "b.ckpt", "upn", document['payload'], document['seed'],
                             document['config_hash'], document['metadata'])
    assert first.read_bytes() == second.read_bytes()


def test_checkpoint_errors(tmp_path):
    path = save_checkpoint(tmp_path / "a.ckpt", "upn", {'x': [1.0, 2.0]}, 0, "abc")
    text = path.read_text(encoding='utf-8')
    truncated = tmp_path / "truncated.ckpt"
    truncated.write_text(text[: len(text) // 2], encoding='utf-8')
    with pytest.raises(CheckpointError):
        load_checkpoint(truncated)
    with pytest.raises(CheckpointError):
        load_checkpoint(path, expected_kind="rat")
    future = tmp_path / "future.ckpt"
    future.write_text(text.replace('"format_version": 1', '"format_version": 99'), encoding='utf-8')
    with pytest.raises(CheckpointError):
        load_checkpoint(future)
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "missing.ckpt")


def test_checkpoint_manager_reuses_current_only(tmp_path):
    manager = CheckpointManager(tmp_path, "point_mass", 0, "hash-a")
    manager.save("upn", {'x': 1}, {'steps': 0})
    assert manager.load_if_current("upn")['payload'] == {'x': 1}
    assert CheckpointManager(tmp_path, "point_mass", 0, "hash-b").load_if_current("upn") is None
    assert manager.load_if_current("rat") is None
    sidecar = json.loads(manager.sidecar_for("upn").read_text(encoding='utf-8'))
    assert sidecar['config_hash'] == "hash-a" and sidecar['seed'] == 0


def test_stage_order_and_exit_codes():
    cfg = ExperimentConfig()
    assert pipeline_stages(cfg) == ['upn', 'upn_ft', 'rat_init', 'upn_parity', 'suprat', 'eval']
    cfg.rat.real_steps = 100
    assert 'rat' in pipeline_stages(cfg)
    assert stage_exit_code('upn') == 10
    assert stage_exit_code('eval') == 16
    assert stage_exit_code('unknown') == 1


def test_zero_budget_pipeline_completes(tmp_path):
    cfg = _config(tmp_path)
    context = Pipeline(cfg).run()
    report = context['report']
    assert {e.method for e in report.entries} == {"transfer", "dr", "rat"}
    assert context['suprat'] is None
    assert context['upn'].steps_trained == 0
    with open(context['results_path'], newline='', encoding='utf-8') as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 6
    assert all(r['seed'] == "0" and r['config_hash'] == cfg.config_hash() for r in rows)
    assert (tmp_path / "upn_point_mass_0.ckpt").exists()


def test_pipeline_is_reproducible(tmp_path):
    outputs = []
    for run in ("a", "b"):
        cfg = _config(tmp_path / run, **SMALL_BUDGETS)
        context = Pipeline(cfg).run()
        outputs.append(tmp_path / run)
        assert context['suprat'] is not None
        assert context['rat'].provenance == "real"
    names = ["results_point_mass_0.csv", "upn_point_mass_0.ckpt", "rat_point_mass_0.ckpt",
             "suprat_point_mass_0.ckpt", "dataset_point_mass_0.csv", "progress_point_mass_0.csv"]
    for name in names:
        assert (outputs[0] / name).read_bytes() == (outputs[1] / name).read_bytes(), name


def test_rerun_resumes_from_checkpoints(tmp_path):
    cfg = _config(tmp_path, **SMALL_BUDGETS)
    first = Pipeline(cfg).run()
    results = Path(first['results_path']).read_bytes()
    second = Pipeline(cfg).run()
    assert Path(second['results_path']).read_bytes() == results
    obs = np.zeros(4)
    theta = first['theta_g']
    np.testing.assert_array_equal(query(first['upn_ft'], obs, theta), query(second['upn_ft'], obs, theta))
    reloaded = UniversalPolicy.from_dict(load_checkpoint(tmp_path / "upn_ft_point_mass_0.ckpt")['payload'])
    np.testing.assert_array_equal(query(reloaded, obs, theta), query(first['upn_ft'], obs, theta))


def test_stage_failure_names_stage(tmp_path):
    pipeline = Pipeline(_config(tmp_path))
    errors = []
    pipeline.event_bus.subscribe(EventTypes.ERROR, errors.append)
    with pytest.raises(StageError) as info:
        pipeline.run(['upn_ft'])
    assert info.value.stage == "upn_ft"
    assert [e.data['stage'] for e in errors] == ["upn_ft"]
    assert pipeline.stage('upn_ft').get_status()['state'] == 'error'


def test_sample_trial_degenerate_space():
    space = SearchSpaceConfig(clip=[0.2, 0.2], entcoeff=[0.0, 0.0], stepsize=[3e-4, 3e-4], lam=[0.95, 0.95],
                              gamma=[0.9, 0.9], reset_options=[True])
    assert space.is_degenerate()
    trial = sample_trial(space, stream(0, "t"))
    assert trial == {'clip': 0.2, 'entcoeff': 0.0, 'stepsize': 3e-4, 'lam': 0.95, 'gamma': 0.9, 'reset': True}


def test_sample_trial_in_range():
    space = SearchSpaceConfig()
    rng = stream(0, "t")
    for _ in range(50):
        trial = sample_trial(space, rng)
        assert space.stepsize[0] <= trial['stepsize'] <= space.stepsize[1]
        assert space.clip[0] <= trial['clip'] <= space.clip[1]


def _untrained_upn(cfg):
    context = Pipeline(cfg).run(['upn'])
    return context['upn'], context['spec']


def test_search_single_trial(tmp_path):
    cfg = _config(tmp_path)
    upn, spec = _untrained_upn(cfg)
    result = hyperparam_search(cfg, upn, spec, output_dir=str(tmp_path))
    assert len(result.trials) == 1
    trial = result.trials[0]
    assert result.best_params == {k: trial[k] for k in ('clip', 'entcoeff', 'stepsize', 'lam', 'gamma', 'reset')}
    assert result.best_objective == trial['objective']
    with open(tmp_path / "trials_point_mass_0.csv", newline='', encoding='utf-8') as f:
        assert len(list(csv.DictReader(f))) == 1
    best = ExperimentConfig.load(str(tmp_path / "best_point_mass_0.json"))
    assert best.rat.ppo.clip == trial['clip']
    assert best.rat.reset == trial['reset']


def test_search_degenerate_space(tmp_path):
    cfg = _config(tmp_path)
    upn, spec = _untrained_upn(cfg)
    space = SearchSpaceConfig(clip=[0.2, 0.2], entcoeff=[0.0, 0.0], stepsize=[3e-4, 3e-4], lam=[0.95, 0.95],
                              gamma=[0.9, 0.9], reset_options=[False], trials=3, trial_episodes=2,
                              objective_episodes=1)
    result = hyperparam_search(cfg, upn, spec, space=space)
    assert len({t['objective'] for t in result.trials}) == 1
    assert result.best_params == {'clip': 0.2, 'entcoeff': 0.0, 'stepsize': 3e-4, 'lam': 0.95, 'gamma': 0.9,
                                  'reset': False}


def test_search_all_trials_failing(tmp_path, monkeypatch):
    cfg = _config(tmp_path)
    upn, spec = _untrained_upn(cfg)

    def diverge(*args, **kwargs):
        raise TrainingDivergedError("PPO loss became non-finite")

    monkeypatch.setattr(hyperopt_module, 'train_rat_initial', diverge)
    with pytest.raises(SearchFailedError) as info:
        hyperparam_search(cfg, upn, spec)
    assert len(info.value.trials) == 1
    assert "non-finite" in str(info.value)


def test_cli_runs_a_stage(tmp_path):
    config_path = tmp_path / "tiny.json"
    config_path.write_text(json.dumps(TINY), encoding='utf-8')
    out = tmp_path / "out"
    assert cli.main(['train-upn', '--config', str(config_path), '--out', str(out), '--no-progress']) == 0
    assert (out / "upn_point_mass_0.ckpt").exists()
    assert cli.main(['train-upn', '--config', str(config_path), '--out', str(out), '--seed', '2',
                     '--no-progress']) == 0
    assert (out / "upn_point_mass_2.ckpt").exists()


def test_cli_sweep_overrides_levels(tmp_path):
    config_path = tmp_path / "tiny.json"
    config_path.write_text(json.dumps(TINY), encoding='utf-8')
    out = tmp_path / "out"
    code = cli.main(['sweep-adjacent', '--config', str(config_path), '--out', str(out), '--levels', '0', '0.2',
                     '--no-progress'])
    assert code == 0
    with open(out / "results_point_mass_0.csv", newline='', encoding='utf-8') as f:
        assert {r['deviation'] for r in csv.DictReader(f)} == {"0.0", "0.2"}


def test_cli_exit_codes(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({'theta_g': [1.5, 0.5, 0.5, 0.5, 0.5]}), encoding='utf-8')
    assert cli.main(['pipeline', '--config', str(bad)]) == cli.EXIT_CONFIG
    broken = dict(TINY, upn=dict(TINY['upn'], theta_low=[0.9] * 5, theta_high=[0.8] * 5))
    path = tmp_path / "broken.json"
    path.write_text(json.dumps(broken), encoding='utf-8')
    assert cli.main(['pipeline', '--config', str(path)]) == cli.EXIT_CONFIG


def test_event_bus_isolates_failing_subscribers():
    bus = EventBus()
    seen = []

    def broken(event):
        raise RuntimeError("boom")

    bus.subscribe(EventTypes.TRAINING_PROGRESS, broken)
    bus.subscribe(EventTypes.TRAINING_PROGRESS, seen.append)
    publish_progress(bus, "upn", update=1, steps=10)
    assert [e.data for e in seen] == [{'stage': "upn", 'update': 1, 'steps': 10}]
    assert bus.get_subscriber_count(EventTypes.TRAINING_PROGRESS) == 2
    with pytest.raises(ValueError):
        bus.subscribe("unknown", seen.append)
    publish_progress(None, "upn", update=2)
