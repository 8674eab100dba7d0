# Generated by Django 4.2.7 on 2026-10-18 09:12

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='RunManifest',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('command', models.CharField(max_length=64, verbose_name='Command')),
                ('config_hash', models.CharField(blank=True, default='', max_length=64, verbose_name='Config hash')),
                ('options', models.JSONField(default=dict, verbose_name='Options')),
                ('input_hashes', models.JSONField(default=dict, help_text='sha256 per input file', verbose_name='Input hashes')),
                ('seeds', models.JSONField(default=dict, verbose_name='Seeds')),
                ('outputs', models.JSONField(default=list, verbose_name='Output files')),
                ('exit_status', models.IntegerField(default=0, verbose_name='Exit status')),
                ('wall_time', models.FloatField(default=0.0, help_text='Seconds', verbose_name='Wall time')),
                ('started_at', models.DateTimeField(verbose_name='Started')),
                ('finished_at', models.DateTimeField(blank=True, null=True, verbose_name='Finished')),
            ],
            options={
                'verbose_name': 'Run manifest',
                'verbose_name_plural': 'Run manifests',
                'ordering': ['-started_at'],
                'indexes': [models.Index(fields=['command'], name='storage_run_command_a1932c_idx'), models.Index(fields=['config_hash'], name='storage_run_config__461a74_idx')],
            },
        ),
    ]
