/*
 * Accelerometer: sample the three axes of an ADXL345 over spidev. The
 * device-driver layer (register access, initialisation, raw-data
 * conversion) is inlined into the program, as a vendor library would be.
 */
// thadc: select d3 d4 d8 d14 d17 d26
// thadc: alias WR_MODE satisfies WR_MODE32

#include <fcntl.h>
#include <stdint.h>
#include <stdio.h>
#include <string.h>
#include <unistd.h>
#include <sys/ioctl.h>
#include <linux/spi/spidev.h>

/* Request numbers from <linux/spi/spidev.h>, expanded. */
#define SPI_IOC_MESSAGE 0x40206b00
#define SPI_IOC_WR_MODE 0x40016b01
#define SPI_IOC_WR_MAX_SPEED_HZ 0x40046b04

#define SPI_MODE_3 3
#define ADXL345_SPI_HZ 5000000

#define ADXL345_READ 0x80
#define ADXL345_MULTIBYTE 0x40
#define ADXL345_DEVID 0x00
#define ADXL345_BW_RATE 0x2C
#define ADXL345_POWER_CTL 0x2D
#define ADXL345_DATA_FORMAT 0x31
#define ADXL345_DATAX0 0x32
#define ADXL345_ID 0xE5
#define ADXL345_PCTL_MEASURE 0x08
#define ADXL345_FULL_RES 0x08
#define ADXL345_RANGE_16G 0x03
#define ADXL345_RATE_100HZ 0x0A
#define SAMPLES 32

enum adxl345_status {
    ADXL345_OK = 0,
    ADXL345_ERR_OPEN = -1,
    ADXL345_ERR_CONFIG = -2,
    ADXL345_ERR_ID = -3,
    ADXL345_ERR_IO = -4
};

struct spi_ioc_transfer {
    uint64_t tx_buf;
    uint64_t rx_buf;
    uint32_t len;
    uint32_t speed_hz;
    uint16_t delay_usecs;
    uint8_t bits_per_word;
};

struct adxl345_dev {
    int fd;
    uint8_t range;
    uint8_t full_res;
};

struct axes {
    int16_t x;
    int16_t y;
    int16_t z;
};

static uint8_t spi_tx[8];
static uint8_t spi_rx[8];

/* --- platform layer ------------------------------------------------ */

static int spi_init(struct adxl345_dev *dev, const char *path) {
    uint8_t mode = SPI_MODE_3;
    uint32_t speed = ADXL345_SPI_HZ;
    int fd = open(path, O_RDWR);
    if (fd < 0) {
        return ADXL345_ERR_OPEN;
    }
    /* The legacy 8-bit mode request; the driver predates SPI_IOC_WR_MODE32. */
    if (ioctl(fd, SPI_IOC_WR_MODE, &mode) < 0) {
        close(fd);
        return ADXL345_ERR_CONFIG;
    }
    if (ioctl(fd, SPI_IOC_WR_MAX_SPEED_HZ, &speed) < 0) {
        close(fd);
        return ADXL345_ERR_CONFIG;
    }
    dev->fd = fd;
    return fd;
}

static int spi_write_and_read(int fd, uint8_t *data, int len) {
    struct spi_ioc_transfer tr;
    memset(&tr, 0, sizeof(tr));
    memcpy(spi_tx, data, len);
    tr.tx_buf = (uint64_t)spi_tx;
    tr.rx_buf = (uint64_t)spi_rx;
    tr.len = len;
    tr.speed_hz = ADXL345_SPI_HZ;
    tr.bits_per_word = 8;
    if (ioctl(fd, SPI_IOC_MESSAGE, &tr) < 1) {
        return ADXL345_ERR_IO;
    }
    memcpy(data, spi_rx, len);
    return ADXL345_OK;
}

/* --- ADXL345 driver ------------------------------------------------ */

static int adxl345_get_register(int fd, uint8_t reg) {
    uint8_t buf[2];
    buf[0] = ADXL345_READ | reg;
    buf[1] = 0;
    if (spi_write_and_read(fd, buf, 2) != ADXL345_OK) {
        return ADXL345_ERR_IO;
    }
    return buf[1];
}

static int adxl345_set_register(int fd, uint8_t reg, uint8_t value) {
    uint8_t buf[2];
    buf[0] = reg;
    buf[1] = value;
    return spi_write_and_read(fd, buf, 2);
}

static int adxl345_set_range(struct adxl345_dev *dev, uint8_t range, uint8_t full_res) {
    int format = adxl345_get_register(dev->fd, ADXL345_DATA_FORMAT);
    if (format < 0) {
        return format;
    }
    format = format & ~(ADXL345_FULL_RES | ADXL345_RANGE_16G);
    format = format | range;
    if (full_res) {
        format = format | ADXL345_FULL_RES;
    }
    dev->range = range;
    dev->full_res = full_res;
    return adxl345_set_register(dev->fd, ADXL345_DATA_FORMAT, format);
}

static int adxl345_set_power_mode(struct adxl345_dev *dev, int measure) {
    int ctl = adxl345_get_register(dev->fd, ADXL345_POWER_CTL);
    if (ctl < 0) {
        return ctl;
    }
    if (measure) {
        ctl = ctl | ADXL345_PCTL_MEASURE;
    } else {
        ctl = ctl & ~ADXL345_PCTL_MEASURE;
    }
    return adxl345_set_register(dev->fd, ADXL345_POWER_CTL, ctl);
}

static int adxl345_init(struct adxl345_dev *dev, const char *path) {
    if (spi_init(dev, path) < 0) {
        return ADXL345_ERR_OPEN;
    }
    if (adxl345_get_register(dev->fd, ADXL345_DEVID) != ADXL345_ID) {
        close(dev->fd);
        return ADXL345_ERR_ID;
    }
    adxl345_set_register(dev->fd, ADXL345_BW_RATE, ADXL345_RATE_100HZ);
    return ADXL345_OK;
}

static int adxl345_get_xyz(struct adxl345_dev *dev, struct axes *out) {
    uint8_t buf[7];
    memset(buf, 0, sizeof(buf));
    buf[0] = ADXL345_READ | ADXL345_MULTIBYTE | ADXL345_DATAX0;
    if (spi_write_and_read(dev->fd, buf, 7) != ADXL345_OK) {
        return ADXL345_ERR_IO;
    }
    out->x = (int16_t)((buf[2] << 8) | buf[1]);
    out->y = (int16_t)((buf[4] << 8) | buf[3]);
    out->z = (int16_t)((buf[6] << 8) | buf[5]);
    return ADXL345_OK;
}

static int to_milli_g(int16_t raw, struct adxl345_dev *dev) {
    if (dev->full_res) {
        return raw * 4;
    }
    return raw * (4 << dev->range);
}

/* --- application --------------------------------------------------- */

int main(int argc, char **argv) {
    struct adxl345_dev dev;
    struct axes a;
    const char *path = "/dev/spidev0.0";
    if (argc > 1) {
        path = argv[1];
    }
    if (adxl345_init(&dev, path) != ADXL345_OK) {
        fprintf(stderr, "adxl345: initialisation failed\n");
        return 1;
    }
    adxl345_set_range(&dev, ADXL345_RANGE_16G, 1);
    adxl345_set_power_mode(&dev, 1);
    for (int i = 0; i < SAMPLES; i++) {
        if (adxl345_get_xyz(&dev, &a) != ADXL345_OK) {
            fprintf(stderr, "adxl345: transfer failed\n");
            break;
        }
        printf("%d %d %d\n", to_milli_g(a.x, &dev), to_milli_g(a.y, &dev), to_milli_g(a.z, &dev));
        usleep(10000);
    }
    adxl345_set_power_mode(&dev, 0);
    close(dev.fd);
    return 0;
}
