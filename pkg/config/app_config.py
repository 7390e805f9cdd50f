#!/usr/bin/env python3
"""
Application Configuration
Centralized configuration management for the dendrite dynamics toolkit
"""

import logging
import os
from pathlib import Path

logger = logging.getLogger(__name__)

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


class AppConfig:
    """Application configuration class"""

    def __init__(self):
        """Initialize configuration with default values"""
        # Get project root directory
        self.project_root = Path(__file__).parent.parent

        # Load environment variables
        self.load_environment()

        # Set default paths
        self.setup_paths()

    def load_environment(self):
        """Load environment variables with defaults"""
        try:
            from dotenv import load_dotenv
            load_dotenv()
        except ImportError:
            pass

        # Reproducibility
        self.seed = int(os.getenv('TOOLKIT_SEED', '0'))

        # Point equality tolerance (normalized edge coordinates)
        self.tau_pt = float(os.getenv('TAU_PT', '1e-9'))

        # Orbit and omega-limit sampling
        self.omega_burn_in = int(os.getenv('OMEGA_BURN_IN', '1000'))
        self.omega_samples = int(os.getenv('OMEGA_SAMPLES', '10000'))
        self.omega_eps = float(os.getenv('OMEGA_EPS', '1e-3'))
        self.cycle_horizon = int(os.getenv('CYCLE_HORIZON', '10000'))

        # Structure verification and bound experiment
        self.structure_eps = float(os.getenv('STRUCTURE_EPS', '1e-3'))
        self.n0_horizon = int(os.getenv('N0_HORIZON', '10000'))

        # Entropy estimation
        self.entropy_grid_density = float(os.getenv('ENTROPY_GRID_DENSITY', '4.5'))
        self.entropy_max_grid = int(os.getenv('ENTROPY_MAX_GRID', '2000000'))

        # Acceptance tolerances
        self.periodic_tolerance = float(os.getenv('PERIODIC_TOLERANCE', '0.01'))
        self.bound_tolerance = float(os.getenv('BOUND_TOLERANCE', '0.01'))

        # Output and logging
        self.output_dir = os.getenv('OUTPUT_DIR', './results')
        self.log_level = os.getenv('LOG_LEVEL', 'INFO').upper()

    def setup_paths(self):
        """Setup application paths"""
        # Convert relative paths to absolute paths
        if self.output_dir.startswith('./'):
            self.output_dir = str(self.project_root / self.output_dir[2:])
        self.models_dir = str(self.project_root / 'src' / 'models')

        if not Path(self.models_dir).exists():
            logger.warning(f"Bundled example directory does not exist: {self.models_dir}")

    def validate_config(self):
        """Validate configuration and return list of issues"""
        issues = []

        for name in ('tau_pt', 'omega_eps', 'structure_eps', 'periodic_tolerance', 'bound_tolerance'):
            if getattr(self, name) <= 0:
                issues.append(f"{name.upper()} must be positive")
        for name in ('omega_burn_in', 'omega_samples', 'cycle_horizon', 'n0_horizon', 'entropy_max_grid'):
            if getattr(self, name) < 1:
                issues.append(f"{name.upper()} must be at least 1")
        if self.tau_pt >= 1e-3:
            issues.append("TAU_PT is too coarse to separate points (use < 1e-3)")
        if self.entropy_grid_density < 4:
            issues.append("ENTROPY_GRID_DENSITY below 4 gives entropy grids coarser than eps/4")
        if self.log_level not in LOG_LEVELS:
            issues.append(f"LOG_LEVEL {self.log_level} is not one of {', '.join(LOG_LEVELS)}")

        return issues

    def get_config_dict(self):
        """Get configuration as dictionary"""
        return {
            'seed': self.seed,
            'tau_pt': self.tau_pt,
            'omega_burn_in': self.omega_burn_in,
            'omega_samples': self.omega_samples,
            'omega_eps': self.omega_eps,
            'cycle_horizon': self.cycle_horizon,
            'structure_eps': self.structure_eps,
            'n0_horizon': self.n0_horizon,
            'entropy_grid_density': self.entropy_grid_density,
            'entropy_max_grid': self.entropy_max_grid,
            'periodic_tolerance': self.periodic_tolerance,
            'bound_tolerance': self.bound_tolerance,
            'output_dir': self.output_dir,
            'log_level': self.log_level,
        }


# Global configuration instance
config = AppConfig()
