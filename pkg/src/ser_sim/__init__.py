from ser_sim.runner import received_frame, run_cell, run_trial
from ser_sim.scenario import ScenarioConfig
from ser_sim.stats import SerPoint, awgn_ser_oracle, wilson_interval
from ser_sim.sweep import SweepSpec, run_sweep
