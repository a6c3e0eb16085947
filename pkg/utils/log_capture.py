"""
Log capture utility for collecting runtime logs and run context.

This utility captures every log entry emitted during one CLI run, together
with the run's arguments and the first error, and renders them as a
markdown run report (written with `--report PATH`).
"""

import logging
import json
import traceback
from datetime import datetime, timezone
from io import StringIO


SENSITIVE_KEYS = {
    'connection_string', 'app_config_connection_string',
    'forge_app_config_connection_string', 'secret', 'token',
}


def _utcnow() -> datetime:
    return datetime.now(timezone.utc)


class LogCapture:
    """Captures log entries and run context for one CLI invocation."""

    def __init__(self):
        """Initialize log capture with empty buffer."""
        self.log_buffer = []
        self.run_data = {}
        self.error_info = {}
        self.verdict = None
        self.start_time = _utcnow()

    def add_log(self, level: str, message: str):
        """
        Add a log entry to the buffer.

        Args:
            level: Log level (INFO, WARNING, ERROR, etc.)
            message: Log message
        """
        self.log_buffer.append({
            "timestamp": _utcnow().isoformat(),
            "level": level,
            "message": message
        })

    def set_run_data(self, arguments: dict | None, config: dict | None = None):
        """
        Capture the run's arguments and effective configuration.

        Args:
            arguments: Parsed command-line arguments
            config: Effective configuration (optional)
        """
        self.run_data = {
            "arguments": self._sanitize(arguments or {}),
            "config": self._sanitize(config) if config else {},
            "timestamp": _utcnow().isoformat()
        }

    def set_verdict(self, exit_code: int, summary: str):
        """Record the run's outcome."""
        self.verdict = {"exit_code": exit_code, "summary": summary}

    def set_error_info(self, error: Exception, context: dict | None = None):
        """
        Capture error information including stack trace.

        Args:
            error: Exception that occurred
            context: Additional context about the error
        """
        self.error_info = {
            "type": type(error).__name__,
            "message": str(error),
            "traceback": traceback.format_exc(),
            "context": context or {},
            "timestamp": _utcnow().isoformat()
        }

    def _sanitize(self, values: dict) -> dict:
        """
        Redact sensitive values such as App Configuration connection strings.

        Args:
            values: Raw key/value mapping

        Returns:
            Sanitized copy with non-JSON values rendered as strings
        """
        sanitized = {}
        for key, value in values.items():
            if key.lower() in SENSITIVE_KEYS:
                sanitized[key] = "[REDACTED]"
            elif isinstance(value, (str, int, float, bool, list, dict)) or value is None:
                sanitized[key] = value
            else:
                sanitized[key] = str(value)
        return sanitized

    def generate_markdown_report(self) -> str:
        """
        Generate a markdown report of the run.

        Returns:
            Markdown-formatted run report
        """
        duration = (_utcnow() - self.start_time).total_seconds()

        md = StringIO()
        md.write("# Forge Run Report\n\n")
        md.write(f"**Generated:** {_utcnow().isoformat()}\n\n")
        md.write(f"**Duration:** {duration:.2f} seconds\n\n")
        if self.verdict:
            md.write(f"**Exit Code:** {self.verdict['exit_code']}\n\n")
            md.write(f"**Verdict:** {self.verdict['summary']}\n\n")
        md.write("---\n\n")

        md.write("## Run Information\n\n")
        if self.run_data:
            md.write("### Arguments\n\n")
            md.write("```json\n")
            md.write(json.dumps(self.run_data.get('arguments', {}), indent=2, sort_keys=True))
            md.write("\n```\n\n")

            if self.run_data.get('config'):
                md.write("### Configuration\n\n")
                md.write("```json\n")
                md.write(json.dumps(self.run_data.get('config', {}), indent=2, sort_keys=True))
                md.write("\n```\n\n")
        else:
            md.write("*No run data captured*\n\n")

        md.write("## Error Information\n\n")
        if self.error_info:
            md.write(f"**Error Type:** `{self.error_info.get('type', 'Unknown')}`\n\n")
            md.write("**Error Message:**\n\n")
            md.write(f"```\n{self.error_info.get('message', 'No message')}\n```\n\n")

            if self.error_info.get('context'):
                md.write("**Error Context:**\n\n")
                md.write("```json\n")
                md.write(json.dumps(self.error_info.get('context', {}), indent=2, default=str))
                md.write("\n```\n\n")

            md.write("**Stack Trace:**\n\n")
            md.write("```python\n")
            md.write(self.error_info.get('traceback', 'No traceback available'))
            md.write("\n```\n\n")
        else:
            md.write("*No errors*\n\n")

        md.write("## Runtime Logs\n\n")
        if self.log_buffer:
            md.write("| Timestamp | Level | Message |\n")
            md.write("|-----------|-------|----------|\n")
            for log_entry in self.log_buffer:
                timestamp = log_entry['timestamp'].split('T')[1][:12]  # HH:MM:SS.mmm
                level = log_entry['level']
                message = log_entry['message'].replace('\n', ' ').replace('|', '\\|')[:100]
                md.write(f"| {timestamp} | {level} | {message} |\n")
            md.write("\n")
        else:
            md.write("*No logs captured*\n\n")

        md.write("---\n\n")
        md.write("*This report was generated by the forge command-line app.*\n")

        return md.getvalue()


class LogCaptureHandler(logging.Handler):
    """Logging handler that forwards records to a LogCapture instance."""

    def __init__(self, log_capture: LogCapture):
        """
        Initialize handler with LogCapture instance.

        Args:
            log_capture: LogCapture instance to send logs to
        """
        super().__init__()
        self.log_capture = log_capture

    def emit(self, record: logging.LogRecord):
        try:
            msg = self.format(record)
            self.log_capture.add_log(record.levelname, msg)
        except Exception:
            self.handleError(record)
