/*
 * I/O Expander: drive the eight GPA pins of an MCP23S17 port expander
 * through the spidev HAL and read back the pin latch.
 */
// thadc: select d3 d4 d14 d26

#include <fcntl.h>
#include <stdint.h>
#include <sys/ioctl.h>
#include <linux/spi/spidev.h>

#define SPI_IOC_MESSAGE_1 0x40206b00
#define SPI_IOC_WR_MAX_SPEED_HZ 0x40046b04

#define MCP_OPCODE_WRITE 0x40
#define MCP_OPCODE_READ 0x41
#define MCP_IODIRA 0x00
#define MCP_GPIOA 0x12
#define SPEED_HZ 1000000

struct spi_ioc_transfer {
    uint64_t tx_buf;
    uint64_t rx_buf;
    uint32_t len;
    uint32_t speed_hz;
};

static uint8_t tx[3];
static uint8_t rx[3];

static int transfer(int fd, uint8_t op, uint8_t reg, uint8_t value) {
    struct spi_ioc_transfer tr;
    memset(&tr, 0, sizeof(tr));
    tx[0] = op;
    tx[1] = reg;
    tx[2] = value;
    tr.tx_buf = (uint64_t)tx;
    tr.rx_buf = (uint64_t)rx;
    tr.len = 3;
    tr.speed_hz = SPEED_HZ;
    return ioctl(fd, SPI_IOC_MESSAGE_1, &tr);
}

static int write_reg(int fd, uint8_t reg, uint8_t value) {
    return transfer(fd, MCP_OPCODE_WRITE, reg, value);
}

static int read_reg(int fd, uint8_t reg) {
    if (transfer(fd, MCP_OPCODE_READ, reg, 0) < 0) {
        return -1;
    }
    return rx[2];
}

int main(void) {
    uint32_t speed = SPEED_HZ;
    int fd = open("/dev/spidev0.0", O_RDWR);
    if (fd < 0) {
        return 1;
    }
    if (ioctl(fd, SPI_IOC_WR_MAX_SPEED_HZ, &speed) < 0) {
        close(fd);
        return 1;
    }
    write_reg(fd, MCP_IODIRA, 0x00);
    for (int pattern = 1; pattern < 256; pattern = pattern << 1) {
        write_reg(fd, MCP_GPIOA, pattern);
        if (read_reg(fd, MCP_GPIOA) != pattern) {
            printf("pin latch mismatch\n");
        }
    }
    write_reg(fd, MCP_GPIOA, 0x00);
    close(fd);
    return 0;
}
