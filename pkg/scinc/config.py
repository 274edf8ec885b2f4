from dotenv import load_dotenv
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

load_dotenv()


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="SCINC_", env_file=".env", extra="ignore")

    log: str = Field("INFO", description="Nivel de log (SCINC_LOG)")
    log_dir: str = Field("logs", description="Carpeta de los archivos de log")
    log_to_file: bool = Field(True, description="Escribir application.log / errors.log")

    # Tolerancias numéricas centralizadas
    factor_rtol: float = 1e-10
    solve_rtol: float = 1e-8
    decrement_tol: float = 1e-8
    assert_slack: float = 1e-6
    strict_assert_dim: int = 50
    verify_slack: float = 1e-6

    # Subsolver interno
    inner_iter_factor: int = 10
    inner_iter_base: int = 500
    power_iterations: int = 20

    phase1_budget_factor: float = 2.0


settings = Settings()
