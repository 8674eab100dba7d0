from django.db import models


class RunManifest(models.Model):
    """Reproducibility record of one command run."""
    command = models.CharField(max_length=64, verbose_name='Command')
    config_hash = models.CharField(max_length=64, blank=True, default='', verbose_name='Config hash')
    options = models.JSONField(default=dict, verbose_name='Options')
    input_hashes = models.JSONField(default=dict, help_text='sha256 per input file', verbose_name='Input hashes')
    seeds = models.JSONField(default=dict, verbose_name='Seeds')
    outputs = models.JSONField(default=list, verbose_name='Output files')

    exit_status = models.IntegerField(default=0, verbose_name='Exit status')
    wall_time = models.FloatField(default=0.0, help_text='Seconds', verbose_name='Wall time')

    started_at = models.DateTimeField(verbose_name='Started')
    finished_at = models.DateTimeField(null=True, blank=True, verbose_name='Finished')

    class Meta:
        verbose_name = 'Run manifest'
        verbose_name_plural = 'Run manifests'
        ordering = ['-started_at']
        indexes = [
            models.Index(fields=['command']),
            models.Index(fields=['config_hash']),
        ]

    def __str__(self):
        return f"{self.command} ({self.started_at:%Y-%m-%d %H:%M:%S}, status {self.exit_status})"

    def as_dict(self) -> dict:
        return {
            'command': self.command,
            'config_hash': self.config_hash,
            'options': self.options,
            'input_hashes': self.input_hashes,
            'seeds': self.seeds,
            'outputs': self.outputs,
            'exit_status': self.exit_status,
            'wall_time': self.wall_time,
            'started_at': self.started_at.isoformat(),
            'finished_at': self.finished_at.isoformat() if self.finished_at else None,
        }
